//! Residual micro-CNN with hand-written backpropagation.
//!
//! Each block is `a = relu(conv3x3_s2(x))`, `r = relu(conv3x3(a) + a)`; the
//! stride-2 first convolution halves the resolution. The head is global
//! average pooling followed by a fully connected layer and softmax.

use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::scalar::Scalar;
use super::LearnerError;
use crate::scene::N_CATEGORIES;
use crate::seed::derive_rng;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    /// Square input side in pixels.
    pub input_size: usize,
    pub channels_per_block: Vec<usize>,
    pub use_residual: bool,
    pub n_classes: usize,
    pub init_seed: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            input_size: 32,
            channels_per_block: vec![8, 16, 32],
            use_residual: true,
            n_classes: N_CATEGORIES,
            init_seed: 0,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<(), LearnerError> {
        let blocks = self.channels_per_block.len();
        if self.n_classes != N_CATEGORIES {
            return Err(LearnerError::InvalidConfig(format!(
                "n_classes must be {N_CATEGORIES}"
            )));
        }
        if blocks == 0 || self.channels_per_block.contains(&0) {
            return Err(LearnerError::InvalidConfig(
                "need at least one block with non-zero channels".into(),
            ));
        }
        if self.input_size == 0 || self.input_size % (1 << blocks) != 0 {
            return Err(LearnerError::InvalidConfig(format!(
                "input_size {} must be divisible by 2^{blocks}",
                self.input_size
            )));
        }
        Ok(())
    }

    pub fn input_len(&self) -> usize {
        3 * self.input_size * self.input_size
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LayerKind {
    ConvWeight,
    ConvBias,
    FcWeight,
    FcBias,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParamTensor<T> {
    pub name: String,
    pub kind: LayerKind,
    pub shape: Vec<usize>,
    pub data: Vec<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Network<T> {
    pub config: ModelConfig,
    pub params: Vec<ParamTensor<T>>,
}

struct BlockCache<T> {
    in_side: usize,
    out_side: usize,
    col_a: Vec<T>,
    a_pre: Vec<T>,
    a: Vec<T>,
    col_b: Vec<T>,
    s: Vec<T>,
    out: Vec<T>,
}

impl<T: Scalar> BlockCache<T> {
    fn new() -> Self {
        Self {
            in_side: 0,
            out_side: 0,
            col_a: Vec::new(),
            a_pre: Vec::new(),
            a: Vec::new(),
            col_b: Vec::new(),
            s: Vec::new(),
            out: Vec::new(),
        }
    }
}

/// Scratch buffers for one forward/backward pass; reuse across samples.
pub struct Workspace<T> {
    blocks: Vec<BlockCache<T>>,
    feat: Vec<T>,
    logits: Vec<T>,
    dcol: Vec<T>,
    grad_a: Vec<T>,
    grad_r: Vec<T>,
    grad_x: Vec<T>,
}

impl<T: Scalar> Workspace<T> {
    pub fn new(config: &ModelConfig) -> Self {
        Self {
            blocks: config.channels_per_block.iter().map(|_| BlockCache::new()).collect(),
            feat: Vec::new(),
            logits: Vec::new(),
            dcol: Vec::new(),
            grad_a: Vec::new(),
            grad_r: Vec::new(),
            grad_x: Vec::new(),
        }
    }
}

#[inline]
fn relu<T: Scalar>(v: T) -> T {
    if v > T::ZERO {
        v
    } else {
        T::ZERO
    }
}

fn out_side(side: usize, stride: usize) -> usize {
    (side + 2 - 3) / stride + 1
}

/// 3x3, padding 1. `col` is `(cin * 9) x (out_side^2)`, row-major.
fn im2col<T: Scalar>(input: &[T], cin: usize, side: usize, stride: usize, col: &mut Vec<T>) -> usize {
    let os = out_side(side, stride);
    let n = os * os;
    col.clear();
    col.resize(cin * 9 * n, T::ZERO);
    for c in 0..cin {
        let plane = &input[c * side * side..(c + 1) * side * side];
        for ky in 0..3 {
            for kx in 0..3 {
                let row = &mut col[((c * 9) + ky * 3 + kx) * n..((c * 9) + ky * 3 + kx + 1) * n];
                for oy in 0..os {
                    let iy = (oy * stride + ky) as isize - 1;
                    if iy < 0 || iy >= side as isize {
                        continue;
                    }
                    let src = &plane[iy as usize * side..(iy as usize + 1) * side];
                    let dst = &mut row[oy * os..(oy + 1) * os];
                    for (ox, d) in dst.iter_mut().enumerate() {
                        let ix = (ox * stride + kx) as isize - 1;
                        if ix >= 0 && ix < side as isize {
                            *d = src[ix as usize];
                        }
                    }
                }
            }
        }
    }
    os
}

fn col2im<T: Scalar>(col: &[T], cin: usize, side: usize, stride: usize, grad_in: &mut [T]) {
    let os = out_side(side, stride);
    let n = os * os;
    for c in 0..cin {
        let plane = &mut grad_in[c * side * side..(c + 1) * side * side];
        for ky in 0..3 {
            for kx in 0..3 {
                let row = &col[((c * 9) + ky * 3 + kx) * n..((c * 9) + ky * 3 + kx + 1) * n];
                for oy in 0..os {
                    let iy = (oy * stride + ky) as isize - 1;
                    if iy < 0 || iy >= side as isize {
                        continue;
                    }
                    let dst = &mut plane[iy as usize * side..(iy as usize + 1) * side];
                    for ox in 0..os {
                        let ix = (ox * stride + kx) as isize - 1;
                        if ix >= 0 && ix < side as isize {
                            dst[ix as usize] += row[oy * os + ox];
                        }
                    }
                }
            }
        }
    }
}

/// `out = W * col + b`, W is `cout x k`.
fn conv_forward<T: Scalar>(w: &[T], b: &[T], col: &[T], cout: usize, k: usize, n: usize, out: &mut Vec<T>) {
    out.clear();
    out.resize(cout * n, T::ZERO);
    for (co, row) in out.chunks_exact_mut(n).enumerate() {
        row.fill(b[co]);
    }
    T::gemm(cout, k, n, T::ONE, w, k as isize, 1, col, n as isize, 1, T::ONE, out, n as isize, 1);
}

/// Accumulates weight and bias gradients; writes `dcol = W^T * dout` when asked.
#[allow(clippy::too_many_arguments)]
fn conv_backward<T: Scalar>(
    w: &[T],
    col: &[T],
    dout: &[T],
    cout: usize,
    k: usize,
    n: usize,
    gw: &mut [T],
    gb: &mut [T],
    dcol: Option<&mut Vec<T>>,
) {
    T::gemm(cout, n, k, T::ONE, dout, n as isize, 1, col, 1, n as isize, T::ONE, gw, k as isize, 1);
    for (co, row) in dout.chunks_exact(n).enumerate() {
        gb[co] += row.iter().copied().sum::<T>();
    }
    if let Some(dcol) = dcol {
        dcol.clear();
        dcol.resize(k * n, T::ZERO);
        T::gemm(k, cout, n, T::ONE, w, 1, k as isize, dout, n as isize, 1, T::ZERO, dcol, n as isize, 1);
    }
}

impl<T: Scalar> Network<T> {
    /// He-normal convolutions, small-variance classifier so the initial
    /// softmax is close to uniform, zero biases.
    pub fn new(config: &ModelConfig) -> Result<Self, LearnerError> {
        config.validate()?;
        let mut rng = derive_rng(config.init_seed, "init", 0);
        let mut normal = |n: usize, std: f64| -> Vec<T> {
            (0..n)
                .map(|_| T::from_f64(std * rng.sample::<f64, _>(StandardNormal)))
                .collect()
        };
        let mut params = Vec::new();
        let mut cin = 3;
        for (bi, &c) in config.channels_per_block.iter().enumerate() {
            for (tag, fan_in) in [("a", cin * 9), ("b", c * 9)] {
                params.push(ParamTensor {
                    name: format!("block{bi}.conv_{tag}.weight"),
                    kind: LayerKind::ConvWeight,
                    shape: vec![c, fan_in / 9, 3, 3],
                    data: normal(c * fan_in, (2.0 / fan_in as f64).sqrt()),
                });
                params.push(ParamTensor {
                    name: format!("block{bi}.conv_{tag}.bias"),
                    kind: LayerKind::ConvBias,
                    shape: vec![c],
                    data: vec![T::ZERO; c],
                });
            }
            cin = c;
        }
        params.push(ParamTensor {
            name: "fc.weight".into(),
            kind: LayerKind::FcWeight,
            shape: vec![config.n_classes, cin],
            data: normal(config.n_classes * cin, 0.1 / (cin as f64).sqrt()),
        });
        params.push(ParamTensor {
            name: "fc.bias".into(),
            kind: LayerKind::FcBias,
            shape: vec![config.n_classes],
            data: vec![T::ZERO; config.n_classes],
        });
        Ok(Self {
            config: config.clone(),
            params,
        })
    }

    pub fn zeros_like(&self) -> Vec<Vec<T>> {
        self.params.iter().map(|p| vec![T::ZERO; p.data.len()]).collect()
    }

    fn n_blocks(&self) -> usize {
        self.config.channels_per_block.len()
    }

    /// Logits for one CHW input; caches activations in `ws` for `backward`.
    pub fn forward<'w>(&self, x: &[T], ws: &'w mut Workspace<T>) -> &'w [T] {
        assert_eq!(x.len(), self.config.input_len(), "input size mismatch");
        let mut side = self.config.input_size;
        let mut cin = 3;
        for bi in 0..self.n_blocks() {
            let c = self.config.channels_per_block[bi];
            let (wa, ba, wb, bb) = (
                &self.params[4 * bi].data,
                &self.params[4 * bi + 1].data,
                &self.params[4 * bi + 2].data,
                &self.params[4 * bi + 3].data,
            );
            let (prev, rest) = ws.blocks.split_at_mut(bi);
            let cache = &mut rest[0];
            let input: &[T] = if bi == 0 { x } else { &prev[bi - 1].out };
            cache.in_side = side;
            let os = im2col(input, cin, side, 2, &mut cache.col_a);
            cache.out_side = os;
            let n = os * os;
            conv_forward(wa, ba, &cache.col_a, c, cin * 9, n, &mut cache.a_pre);
            cache.a.clear();
            cache.a.extend(cache.a_pre.iter().map(|&v| relu(v)));
            im2col(&cache.a, c, os, 1, &mut cache.col_b);
            conv_forward(wb, bb, &cache.col_b, c, c * 9, n, &mut cache.s);
            if self.config.use_residual {
                for (s, &a) in cache.s.iter_mut().zip(&cache.a) {
                    *s += a;
                }
            }
            cache.out.clear();
            cache.out.extend(cache.s.iter().map(|&v| relu(v)));
            side = os;
            cin = c;
        }

        let last = &ws.blocks[self.n_blocks() - 1];
        let n = side * side;
        let inv_n = T::from_f64(1.0 / n as f64);
        ws.feat.clear();
        ws.feat
            .extend(last.out.chunks_exact(n).map(|ch| ch.iter().copied().sum::<T>() * inv_n));

        let fc_w = &self.params[4 * self.n_blocks()].data;
        let fc_b = &self.params[4 * self.n_blocks() + 1].data;
        ws.logits.clear();
        for j in 0..self.config.n_classes {
            let row = &fc_w[j * cin..(j + 1) * cin];
            let dot: T = row.iter().zip(&ws.feat).map(|(&w, &f)| w * f).sum();
            ws.logits.push(dot + fc_b[j]);
        }
        &ws.logits
    }

    /// Backpropagates `dlogits` through the activations cached by the last
    /// `forward` call, accumulating into `grads`.
    pub fn backward(&self, dlogits: &[T], ws: &mut Workspace<T>, grads: &mut [Vec<T>]) {
        let nb = self.n_blocks();
        let c_last = self.config.channels_per_block[nb - 1];
        let fc_w = &self.params[4 * nb].data;
        {
            let (head, tail) = grads.split_at_mut(4 * nb + 1);
            let gw = &mut head[4 * nb];
            let gb = &mut tail[0];
            for j in 0..self.config.n_classes {
                let d = dlogits[j];
                gb[j] += d;
                for (g, &f) in gw[j * c_last..(j + 1) * c_last].iter_mut().zip(&ws.feat) {
                    *g += d * f;
                }
            }
        }
        let side = ws.blocks[nb - 1].out_side;
        let n = side * side;
        let inv_n = T::from_f64(1.0 / n as f64);
        ws.grad_r.clear();
        for c in 0..c_last {
            let mut df = T::ZERO;
            for j in 0..self.config.n_classes {
                df += fc_w[j * c_last + c] * dlogits[j];
            }
            let v = df * inv_n;
            ws.grad_r.extend(std::iter::repeat(v).take(n));
        }

        for bi in (0..nb).rev() {
            let c = self.config.channels_per_block[bi];
            let cin = if bi == 0 { 3 } else { self.config.channels_per_block[bi - 1] };
            let cache = &ws.blocks[bi];
            let os = cache.out_side;
            let n = os * os;

            // ds = dr * [s > 0]
            for (g, &s) in ws.grad_r.iter_mut().zip(&cache.s) {
                if !(s > T::ZERO) {
                    *g = T::ZERO;
                }
            }
            let (ga, gb_) = grads.split_at_mut(4 * bi + 2);
            let (gwb, gbb) = gb_.split_at_mut(1);
            conv_backward(
                &self.params[4 * bi + 2].data,
                &cache.col_b,
                &ws.grad_r,
                c,
                c * 9,
                n,
                &mut gwb[0],
                &mut gbb[0],
                Some(&mut ws.dcol),
            );
            ws.grad_a.clear();
            if self.config.use_residual {
                ws.grad_a.extend_from_slice(&ws.grad_r);
            } else {
                ws.grad_a.resize(c * n, T::ZERO);
            }
            col2im(&ws.dcol, c, os, 1, &mut ws.grad_a);
            for (g, &a) in ws.grad_a.iter_mut().zip(&cache.a_pre) {
                if !(a > T::ZERO) {
                    *g = T::ZERO;
                }
            }
            let (gwa, gba) = ga[4 * bi..].split_at_mut(1);
            let need_input_grad = bi > 0;
            conv_backward(
                &self.params[4 * bi].data,
                &cache.col_a,
                &ws.grad_a,
                c,
                cin * 9,
                n,
                &mut gwa[0],
                &mut gba[0],
                need_input_grad.then_some(&mut ws.dcol),
            );
            if need_input_grad {
                let in_side = cache.in_side;
                ws.grad_x.clear();
                ws.grad_x.resize(cin * in_side * in_side, T::ZERO);
                col2im(&ws.dcol, cin, in_side, 2, &mut ws.grad_x);
                std::mem::swap(&mut ws.grad_r, &mut ws.grad_x);
            }
        }
    }

    /// Cross-entropy of one sample; accumulates `scale * dL/dtheta`.
    pub fn sample_loss_and_grad(
        &self,
        x: &[T],
        label: usize,
        scale: T,
        ws: &mut Workspace<T>,
        grads: &mut [Vec<T>],
    ) -> f64 {
        let logits: Vec<f64> = self.forward(x, ws).iter().map(|v| v.to_f64()).collect();
        let probs = softmax(&logits);
        let loss = log_sum_exp(&logits) - logits[label];
        let dlogits: Vec<T> = probs
            .iter()
            .enumerate()
            .map(|(j, &p)| T::from_f64(p - if j == label { 1.0 } else { 0.0 }) * scale)
            .collect();
        self.backward(&dlogits, ws, grads);
        loss
    }

    /// Mean cross-entropy over a batch and its parameter gradients.
    pub fn loss_and_grads(&self, batch: &[&[T]], labels: &[usize]) -> (f64, Vec<Vec<T>>) {
        assert_eq!(batch.len(), labels.len());
        let mut grads = self.zeros_like();
        let mut ws = Workspace::new(&self.config);
        let scale = T::from_f64(1.0 / batch.len() as f64);
        let mut total = 0.0;
        for (x, &y) in batch.iter().zip(labels) {
            total += self.sample_loss_and_grad(x, y, scale, &mut ws, &mut grads);
        }
        (total / batch.len() as f64, grads)
    }

    pub fn mean_loss(&self, batch: &[&[T]], labels: &[usize]) -> f64 {
        let mut ws = Workspace::new(&self.config);
        let total: f64 = batch
            .iter()
            .zip(labels)
            .map(|(x, &y)| {
                let logits: Vec<f64> = self.forward(x, &mut ws).iter().map(|v| v.to_f64()).collect();
                log_sum_exp(&logits) - logits[y]
            })
            .sum();
        total / batch.len() as f64
    }

    pub fn all_finite(&self) -> bool {
        self.params.iter().all(|p| p.data.iter().all(|v| v.is_finite()))
    }
}

pub fn log_sum_exp(logits: &[f64]) -> f64 {
    let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    m + logits.iter().map(|&l| (l - m).exp()).sum::<f64>().ln()
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&l| (l - m).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.iter().map(|e| e / sum).collect()
}

/// Index of the largest value; ties go to the lowest index.
pub fn argmax<V: PartialOrd + Copy>(values: &[V]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}
