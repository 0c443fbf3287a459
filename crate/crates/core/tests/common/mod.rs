//! Shared helpers for integration tests: independent numerical KL oracles
//! and small model builders.
#![allow(dead_code)]

use bayes_lens::linear_oracle::LinearModelSpec;
use bayes_lens::sample_store::Predictive;
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

/// Composite Simpson rule on `[a, b]` with `m` (even) intervals.
pub fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, m: usize) -> f64 {
    assert!(m % 2 == 0);
    let h = (b - a) / m as f64;
    let mut s = f(a) + f(b);
    for k in 1..m {
        let w = if k % 2 == 1 { 4.0 } else { 2.0 };
        s += w * f(a + k as f64 * h);
    }
    s * h / 3.0
}

/// KL between normals by quadrature of `p (log p - log q)` over a wide grid.
pub fn normal_kl_quadrature(m1: f64, v1: f64, m2: f64, v2: f64) -> f64 {
    let lp = |x: f64| -0.5 * (2.0 * std::f64::consts::PI * v1).ln() - (x - m1).powi(2) / (2.0 * v1);
    let lq = |x: f64| -0.5 * (2.0 * std::f64::consts::PI * v2).ln() - (x - m2).powi(2) / (2.0 * v2);
    let sd = v1.sqrt();
    simpson(|x| lp(x).exp() * (lp(x) - lq(x)), m1 - 14.0 * sd, m1 + 14.0 * sd, 40_000)
}

/// Poisson KL by summing the series until the remaining mass is negligible.
pub fn poisson_kl_series(l1: f64, l2: f64) -> f64 {
    // pmf by recursion p(k) = p(k-1) * l1 / k; the log ratio needs no factorials
    let mut pk = (-l1).exp();
    let mut total = 0.0;
    let mut mass = 0.0;
    let mut k = 0u32;
    loop {
        let ratio = k as f64 * (l1 / l2).ln() - l1 + l2;
        total += pk * ratio;
        mass += pk;
        k += 1;
        if k as f64 > l1 && 1.0 - mass < 1e-15 && pk < 1e-18 {
            break;
        }
        pk *= l1 / k as f64;
        if k > 100_000 {
            break;
        }
    }
    total
}

/// Binomial KL by direct summation over the support.
pub fn binomial_kl_sum(p1: f64, p2: f64, m: u32) -> f64 {
    let mut total = 0.0;
    // pmf recursion from k = 0
    let mut pk = (1.0 - p1).powi(m as i32);
    for k in 0..=m {
        let kf = k as f64;
        let ratio = kf * (p1 / p2).ln() + (m as f64 - kf) * ((1.0 - p1) / (1.0 - p2)).ln();
        total += pk * ratio;
        if k < m {
            pk *= (m - k) as f64 / (k + 1) as f64 * p1 / (1.0 - p1);
        }
    }
    total
}

/// Gamma KL by quadrature after `x = exp(u)`, with both densities
/// normalized numerically so no special functions are involved.
pub fn gamma_kl_quadrature(a1: f64, b1: f64, a2: f64, b2: f64) -> f64 {
    // log of the unnormalized density times the Jacobian x
    let lp = |u: f64| a1 * u - b1 * u.exp();
    let lq = |u: f64| a2 * u - b2 * u.exp();
    let range = |a: f64, b: f64| ((a / b).ln() - 50.0 / a - 5.0, ((a + 80.0) / b).ln() + 1.0);
    let m = 200_000;
    let log_norm = |l: &dyn Fn(f64) -> f64, (lo, hi): (f64, f64), peak: f64| {
        let shift = l(peak);
        simpson(|u| (l(u) - shift).exp(), lo, hi, m).ln() + shift
    };
    let ln_zp = log_norm(&lp, range(a1, b1), (a1 / b1).ln());
    let ln_zq = log_norm(&lq, range(a2, b2), (a2 / b2).ln());
    let (lo, hi) = range(a1, b1);
    simpson(
        |u| {
            let lpn = lp(u) - ln_zp;
            lpn.exp() * (lpn - (lq(u) - ln_zq))
        },
        lo,
        hi,
        m,
    )
}

/// Numerical oracle for any supported predictive pair.
pub fn kl_oracle(p: &Predictive, q: &Predictive) -> f64 {
    match (*p, *q) {
        (Predictive::NormalKnownVar { mean: m1, var: v1 }, Predictive::NormalKnownVar { mean: m2, var: v2 })
        | (Predictive::Normal { mean: m1, var: v1 }, Predictive::Normal { mean: m2, var: v2 }) => {
            normal_kl_quadrature(m1, v1, m2, v2)
        }
        (Predictive::Poisson { rate: a }, Predictive::Poisson { rate: b }) => poisson_kl_series(a, b),
        (Predictive::Binomial { prob: a, trials }, Predictive::Binomial { prob: b, .. }) => {
            binomial_kl_sum(a, b, trials)
        }
        (Predictive::Gamma { shape: a1, rate: b1 }, Predictive::Gamma { shape: a2, rate: b2 }) => {
            gamma_kl_quadrature(a1, b1, a2, b2)
        }
        _ => panic!("mismatched families"),
    }
}

/// Random same-family pair with moderate parameters.
pub fn random_pair<R: Rng>(rng: &mut R, family: usize) -> (Predictive, Predictive) {
    match family {
        0 => {
            let v = rng.random_range(0.2..5.0);
            (
                Predictive::NormalKnownVar { mean: rng.random_range(-3.0..3.0), var: v },
                Predictive::NormalKnownVar { mean: rng.random_range(-3.0..3.0), var: v },
            )
        }
        1 => (
            Predictive::Normal { mean: rng.random_range(-3.0..3.0), var: rng.random_range(0.2..5.0) },
            Predictive::Normal { mean: rng.random_range(-3.0..3.0), var: rng.random_range(0.2..5.0) },
        ),
        2 => (
            Predictive::Poisson { rate: rng.random_range(0.1..30.0) },
            Predictive::Poisson { rate: rng.random_range(0.1..30.0) },
        ),
        3 => {
            let m = rng.random_range(1..=50);
            (
                Predictive::Binomial { prob: rng.random_range(0.02..0.98), trials: m },
                Predictive::Binomial { prob: rng.random_range(0.02..0.98), trials: m },
            )
        }
        _ => (
            Predictive::Gamma { shape: rng.random_range(0.5..20.0), rate: rng.random_range(0.2..5.0) },
            Predictive::Gamma { shape: rng.random_range(0.5..20.0), rate: rng.random_range(0.2..5.0) },
        ),
    }
}

pub const FAMILY_NAMES: [&str; 5] = ["normal_known_var", "normal", "poisson", "binomial", "gamma"];

pub fn argmax(v: &[f64]) -> usize {
    v.iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)
        .expect("nonempty")
}

pub fn median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    if n % 2 == 1 {
        s[n / 2]
    } else {
        0.5 * (s[n / 2 - 1] + s[n / 2])
    }
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

/// Intercept plus one standard normal covariate.
pub fn simple_regression<R: Rng>(rng: &mut R, n: usize) -> LinearModelSpec {
    let x = DMatrix::from_fn(n, 2, |_, j| if j == 0 { 1.0 } else { rng.sample(StandardNormal) });
    let y = DVector::from_fn(n, |i, _| {
        0.5 + 0.3 * x[(i, 1)] + rng.sample::<f64, _>(StandardNormal)
    });
    LinearModelSpec::flat(x, y, 1.0).expect("valid spec")
}

/// Intercept-focused informative prior: intercept prior sd `tau` centred at
/// `m0`, flat on the slope. Returned with the prior mean moved to zero.
pub fn intercept_prior(base: &LinearModelSpec, m0: f64, tau: f64) -> LinearModelSpec {
    let mut psi = DMatrix::zeros(2, 2);
    psi[(0, 0)] = 1.0 / (tau * tau);
    let spec = LinearModelSpec::new(base.x.clone(), base.y.clone(), base.sigma2, psi).expect("valid");
    spec.center_prior(&DVector::from_vec(vec![m0, 0.0])).expect("valid")
}
