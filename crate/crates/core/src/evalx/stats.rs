use rand::Rng;
use serde::{Deserialize, Serialize};

use super::EvalError;
use crate::seed::rng_from;

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample standard deviation (n - 1 denominator); 0 for fewer than two values.
pub fn sd(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64).sqrt()
}

pub fn se(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    sd(xs) / (xs.len() as f64).sqrt()
}

/// Average ranks (1-based), ties share the mean rank.
pub fn ranks(xs: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..xs.len()).collect();
    idx.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut out = vec![0.0; xs.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && xs[idx[j + 1]] == xs[idx[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            out[k] = r;
        }
        i = j + 1;
    }
    out
}

/// Spearman rank correlation: Pearson correlation of the average ranks.
pub fn spearman(xs: &[f64], ys: &[f64]) -> f64 {
    assert_eq!(xs.len(), ys.len());
    let (rx, ry) = (ranks(xs), ranks(ys));
    let (mx, my) = (mean(&rx), mean(&ry));
    let cov: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = rx.iter().map(|a| (a - mx).powi(2)).sum();
    let vy: f64 = ry.iter().map(|b| (b - my).powi(2)).sum();
    if vx == 0.0 || vy == 0.0 {
        return 0.0;
    }
    cov / (vx * vy).sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub a: String,
    pub b: String,
    /// Mean of the paired differences `a_i - b_i`.
    pub diff: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    /// Number of pairs with `a_i > b_i`.
    pub consistency: usize,
    pub n: usize,
}

impl Comparison {
    pub fn pair(&self) -> String {
        format!("{}>{}", self.a, self.b)
    }

    pub fn ci_excludes_zero(&self) -> bool {
        self.ci_lo > 0.0 || self.ci_hi < 0.0
    }
}

/// Paired bootstrap of the mean difference with a 95% percentile interval.
pub fn compare(a: &[f64], b: &[f64], n_boot: usize, seed: u64) -> Result<(f64, f64, f64, usize), EvalError> {
    if a.len() != b.len() {
        return Err(EvalError::LengthMismatch(a.len(), b.len()));
    }
    if a.is_empty() || n_boot == 0 {
        return Err(EvalError::Empty("comparison needs runs and resamples".into()));
    }
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let n = d.len();
    let mut rng = rng_from(seed);
    let mut boots: Vec<f64> = (0..n_boot)
        .map(|_| (0..n).map(|_| d[rng.gen_range(0..n)]).sum::<f64>() / n as f64)
        .collect();
    boots.sort_by(f64::total_cmp);
    let q = |p: f64| {
        let pos = p * (n_boot - 1) as f64;
        let lo = pos.floor() as usize;
        let hi = pos.ceil() as usize;
        boots[lo] + (boots[hi] - boots[lo]) * (pos - lo as f64)
    };
    let consistency = d.iter().filter(|&&x| x > 0.0).count();
    Ok((mean(&d), q(0.025), q(0.975), consistency))
}

pub fn compare_named(
    a_name: &str,
    a: &[f64],
    b_name: &str,
    b: &[f64],
    n_boot: usize,
    seed: u64,
) -> Result<Comparison, EvalError> {
    let (diff, ci_lo, ci_hi, consistency) = compare(a, b, n_boot, seed)?;
    Ok(Comparison {
        a: a_name.to_string(),
        b: b_name.to_string(),
        diff,
        ci_lo,
        ci_hi,
        consistency,
        n: a.len(),
    })
}
