//! Small numerical kernels shared by the diagnostics modules.
//!
//! All variances use the unbiased `S - 1` denominator. Sums run in index
//! order so results are reproducible bit for bit.

use serde::{Deserialize, Serialize};

/// A point estimate with its Monte Carlo standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub mcse: f64,
}

impl Estimate {
    pub fn new(value: f64, mcse: f64) -> Self {
        Self { value, mcse }
    }
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Unbiased sample variance (two-pass). Returns 0 for fewer than two values.
pub fn variance(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    let ss: f64 = xs.iter().map(|x| (x - m) * (x - m)).sum();
    ss / (xs.len() - 1) as f64
}

/// Unbiased variance of `xs[idx]` for an index subset.
pub fn variance_at(xs: &[f64], idx: &[usize]) -> f64 {
    if idx.len() < 2 {
        return 0.0;
    }
    let m = idx.iter().map(|&k| xs[k]).sum::<f64>() / idx.len() as f64;
    let ss: f64 = idx.iter().map(|&k| (xs[k] - m) * (xs[k] - m)).sum();
    ss / (idx.len() - 1) as f64
}

pub fn mean_at(xs: &[f64], idx: &[usize]) -> f64 {
    idx.iter().map(|&k| xs[k]).sum::<f64>() / idx.len() as f64
}

/// `ln(mean(exp(xs)))`, shifted by the maximum so large magnitudes do not overflow.
pub fn log_mean_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    let s: f64 = xs.iter().map(|x| (x - max).exp()).sum();
    max + (s / xs.len() as f64).ln()
}

pub fn log_mean_exp_at(xs: &[f64], idx: &[usize]) -> f64 {
    let max = idx.iter().map(|&k| xs[k]).fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    let s: f64 = idx.iter().map(|&k| (xs[k] - max).exp()).sum();
    max + (s / idx.len() as f64).ln()
}

/// Twice the Jensen gap `log E[exp(x)] - E[x]`, clamped at zero.
pub fn doubled_jensen_gap(xs: &[f64]) -> f64 {
    (2.0 * (log_mean_exp(xs) - mean(xs))).max(0.0)
}

pub fn doubled_jensen_gap_at(xs: &[f64], idx: &[usize]) -> f64 {
    (2.0 * (log_mean_exp_at(xs, idx) - mean_at(xs, idx))).max(0.0)
}

/// Standard error of the mean of independent replicate estimates.
///
/// Returns NaN when fewer than two replicates exist.
pub fn replicate_se(estimates: &[f64]) -> f64 {
    if estimates.len() < 2 {
        return f64::NAN;
    }
    (variance(estimates) / estimates.len() as f64).sqrt()
}
