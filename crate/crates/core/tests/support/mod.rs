//! Independent reference implementations shared by the oracle tests and the
//! acceptance suite.
#![allow(dead_code)]

use egoword::acuity::{blur_level, eccentricity_deg, foveate, AcuityParams};
use egoword::events::segment_utterances;
use egoword::learner::{LayerKind, ModelConfig, Network};
use egoword::seed::derive_rng;
use egoword::Image;
use rand::Rng;

pub fn acuity_params() -> AcuityParams {
    AcuityParams {
        ppd: 640.0 / 70.0,
        e2_deg: 2.3,
        max_levels: 6,
        sigma0_px: 1.0,
    }
}

/// Timeline segmenter: paint speech milliseconds, fill interior silences
/// shorter than 400 ms, read off the speech runs.
pub fn brute_segment(intervals: &[(u64, u64)]) -> Vec<(u64, u64)> {
    let end = intervals.last().map_or(0, |i| i.1) as usize;
    let mut speech = vec![false; end];
    for &(on, off) in intervals {
        speech[on as usize..off as usize].iter_mut().for_each(|s| *s = true);
    }
    let mut t = speech.iter().position(|&s| s).unwrap_or(end);
    while t < end {
        if speech[t] {
            t += 1;
            continue;
        }
        let gap_end = (t..end).find(|&u| speech[u]).unwrap_or(end);
        if gap_end < end && gap_end - t < 400 {
            speech[t..gap_end].iter_mut().for_each(|s| *s = true);
        }
        t = gap_end;
    }
    let mut out = Vec::new();
    let mut t = 0;
    while t < end {
        if speech[t] {
            let stop = (t..end).find(|&u| !speech[u]).unwrap_or(end);
            out.push((t as u64, stop as u64));
            t = stop;
        } else {
            t += 1;
        }
    }
    out
}

/// Runs the segmenter against [`brute_segment`] on every interval set of up
/// to six intervals with gaps in {399, 400, 401} ms and durations in
/// {1, 250} ms. Returns the number of cases, or the first disagreement.
pub fn exhaustive_segmentation() -> Result<usize, String> {
    let gaps = [399u64, 400, 401];
    let durations = [1u64, 250];
    let mut cases = 0;
    for n in 0..=6usize {
        for g in 0..3usize.pow(n.saturating_sub(1) as u32) {
            for d in 0..(1usize << n) {
                let mut t = 100u64;
                let mut ivs = Vec::with_capacity(n);
                let mut gcode = g;
                for k in 0..n {
                    if k > 0 {
                        t += gaps[gcode % 3];
                        gcode /= 3;
                    }
                    let dur = durations[(d >> k) & 1];
                    ivs.push((t, t + dur));
                    t += dur;
                }
                let got: Vec<(u64, u64)> = segment_utterances(&ivs)
                    .map_err(|e| e.to_string())?
                    .iter()
                    .map(|u| (u.onset_ms, u.offset_ms))
                    .collect();
                let want = brute_segment(&ivs);
                if got != want {
                    return Err(format!("{ivs:?}: got {got:?}, oracle {want:?}"));
                }
                cases += 1;
            }
        }
    }
    Ok(cases)
}

/// Direct 2-D Gaussian at one pixel, clamp-to-edge, radius 4 sigma.
pub fn direct_blur(img: &Image, x: usize, y: usize, sigma: f64) -> [f64; 3] {
    if sigma == 0.0 {
        let p = img.get(x, y);
        return [p[0] as f64, p[1] as f64, p[2] as f64];
    }
    let r = (4.0 * sigma).ceil() as i64;
    let (w, h) = (img.width() as i64, img.height() as i64);
    let mut acc = [0.0; 3];
    let mut total = 0.0;
    for dy in -r..=r {
        for dx in -r..=r {
            let wt = (-((dx * dx + dy * dy) as f64) / (2.0 * sigma * sigma)).exp();
            let sx = (x as i64 + dx).clamp(0, w - 1) as usize;
            let sy = (y as i64 + dy).clamp(0, h - 1) as usize;
            let p = img.get(sx, sy);
            for c in 0..3 {
                acc[c] += wt * p[c] as f64;
            }
            total += wt;
        }
    }
    acc.map(|a| a / total)
}

/// 95th-percentile absolute error of `foveate` against per-pixel direct
/// Gaussians at the two bracketing levels, on a 64x64 block texture.
pub fn variable_sigma_p95() -> f64 {
    let p = acuity_params();
    let mut rng = derive_rng(3, "oracle", 0);
    let (w, h) = (64usize, 64usize);
    let cells: Vec<[f32; 3]> = (0..64).map(|_| [rng.gen(), rng.gen(), rng.gen()]).collect();
    let mut img = Image::new(w, h);
    for y in 0..h {
        for x in 0..w {
            img.set(x, y, cells[(y / 8) * 8 + x / 8]);
        }
    }
    let gaze = [20.0, 37.0];
    let out = foveate(&img, gaze, &p).unwrap().image;
    let top = p.max_levels - 1;
    let sigma = |level: usize| if level == 0 { 0.0 } else { p.sigma0_px * 2f64.powi(level as i32 - 1) };
    let mut errs = Vec::with_capacity(w * h * 3);
    for y in 0..h {
        for x in 0..w {
            let level = blur_level(eccentricity_deg([x as f64, y as f64], gaze, p.ppd), &p);
            let lo = (level.floor() as usize).min(top);
            let hi = (level.ceil() as usize).min(top);
            let t = level - lo as f64;
            let a = direct_blur(&img, x, y, sigma(lo));
            let b = direct_blur(&img, x, y, sigma(hi));
            let got = out.get(x, y);
            for c in 0..3 {
                errs.push((got[c] as f64 - (a[c] + (b[c] - a[c]) * t)).abs());
            }
        }
    }
    errs.sort_by(f64::total_cmp);
    errs[(errs.len() as f64 * 0.95) as usize]
}

pub fn checkerboard(w: usize, h: usize, cell: usize) -> Image {
    let mut img = Image::new(w, h);
    for y in 0..h {
        for x in 0..w {
            let v = if (x / cell + y / cell) % 2 == 0 { 0.9 } else { 0.1 };
            img.set(x, y, [v, v, v]);
        }
    }
    img
}

/// Mean absolute 4-neighbour Laplacian inside an annulus around `gaze`.
pub fn annulus_energy(img: &Image, gaze: [f64; 2], r0: f64, r1: f64) -> f64 {
    let (w, h) = (img.width(), img.height());
    let l = |x: usize, y: usize| img.get(x, y)[0] as f64;
    let mut sum = 0.0;
    let mut n = 0usize;
    for y in 1..h - 1 {
        for x in 1..w - 1 {
            let d = ((x as f64 - gaze[0]).powi(2) + (y as f64 - gaze[1]).powi(2)).sqrt();
            if d < r0 || d >= r1 {
                continue;
            }
            let lap = 4.0 * l(x, y) - l(x - 1, y) - l(x + 1, y) - l(x, y - 1) - l(x, y + 1);
            sum += lap.abs();
            n += 1;
        }
    }
    sum / n as f64
}

/// High-frequency energy of a foveated 256x256 checkerboard in 16 px
/// annuli around a central gaze.
pub fn checkerboard_annuli() -> Vec<f64> {
    let img = checkerboard(256, 256, 4);
    let gaze = [128.0, 128.0];
    let out = foveate(&img, gaze, &acuity_params()).unwrap().image;
    (0..8)
        .map(|k| annulus_energy(&out, gaze, 16.0 * k as f64, 16.0 * (k + 1) as f64))
        .collect()
}

/// Largest ratio by which an outer annulus exceeds any inner one.
pub fn worst_outer_excess(energies: &[f64]) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..energies.len() {
        for j in i + 1..energies.len() {
            worst = worst.max(energies[j] / energies[i] - 1.0);
        }
    }
    worst
}

/// Largest deviation at the gaze pixel over `cases` random images and gazes.
pub fn worst_gaze_pixel_error(cases: usize, seed: u64) -> f32 {
    let mut rng = derive_rng(seed, "fovea", 0);
    let mut worst = 0.0f32;
    for _ in 0..cases {
        let (w, h) = (rng.gen_range(8..80usize), rng.gen_range(8..80usize));
        let data: Vec<f32> = (0..w * h * 3).map(|_| rng.gen()).collect();
        let img = Image::from_raw(w, h, data);
        let gaze = [rng.gen_range(0.0..(w - 1) as f64), rng.gen_range(0.0..(h - 1) as f64)];
        let p = AcuityParams {
            e2_deg: rng.gen_range(0.5..5.0),
            ..acuity_params()
        };
        let out = foveate(&img, gaze, &p).unwrap().image;
        let (x, y) = (gaze[0].round() as usize, gaze[1].round() as usize);
        let (a, b) = (img.get(x, y), out.get(x, y));
        for c in 0..3 {
            worst = worst.max((a[c] - b[c]).abs());
        }
    }
    worst
}

pub const GRAD_EPS: f64 = 1e-3;

/// Central-difference check on an 8x8 network with two channels per block:
/// `probes` random parameters per layer kind. Returns the worst relative
/// error per kind.
pub fn gradient_check(probes: usize) -> Vec<(LayerKind, f64)> {
    let cfg = ModelConfig {
        input_size: 8,
        channels_per_block: vec![2, 2, 2],
        init_seed: 11,
        ..ModelConfig::default()
    };
    let mut net = Network::<f64>::new(&cfg).unwrap();
    let mut rng = derive_rng(5, "gradcheck", 0);
    // Non-zero biases so bias gradients pass through active units.
    for p in &mut net.params {
        if matches!(p.kind, LayerKind::ConvBias | LayerKind::FcBias) {
            p.data.iter_mut().for_each(|b| *b = rng.gen_range(-0.1..0.1));
        }
    }
    let inputs: Vec<Vec<f64>> = (0..3)
        .map(|_| (0..cfg.input_len()).map(|_| rng.gen_range(-1.0..1.0)).collect())
        .collect();
    let batch: Vec<&[f64]> = inputs.iter().map(|x| x.as_slice()).collect();
    let labels = [3usize, 17, 0];
    let (_, grads) = net.loss_and_grads(&batch, &labels);

    let mut out = Vec::new();
    for kind in [LayerKind::ConvWeight, LayerKind::ConvBias, LayerKind::FcWeight, LayerKind::FcBias] {
        let tensors: Vec<usize> = (0..net.params.len()).filter(|&i| net.params[i].kind == kind).collect();
        let mut worst = 0.0f64;
        for _ in 0..probes {
            let t = tensors[rng.gen_range(0..tensors.len())];
            let j = rng.gen_range(0..net.params[t].data.len());
            let orig = net.params[t].data[j];
            net.params[t].data[j] = orig + GRAD_EPS;
            let up = net.mean_loss(&batch, &labels);
            net.params[t].data[j] = orig - GRAD_EPS;
            let down = net.mean_loss(&batch, &labels);
            net.params[t].data[j] = orig;
            let numeric = (up - down) / (2.0 * GRAD_EPS);
            let analytic = grads[t][j];
            let scale = analytic.abs().max(numeric.abs());
            if scale >= 1e-8 {
                worst = worst.max((analytic - numeric).abs() / scale);
            }
        }
        out.push((kind, worst));
    }
    out
}
