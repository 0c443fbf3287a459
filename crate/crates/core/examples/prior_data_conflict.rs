//! Prior-data conflict as the prior mean moves away from the data and as the
//! prior tightens.
//!
//! The ratio p_V / p_W is about 2 without conflict and grows as the prior
//! disagrees with the likelihood. Tightening a conflicting prior first raises
//! the ratio, then lowers it once the prior dominates.

use bayes_lens::influence::{influence_report, InfluenceConfig};
use bayes_lens::linear_oracle::{exact_sampler, LinearModelSpec};
use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

/// Intercept prior N(m0, tau^2), flat slope prior.
fn with_prior(base: &LinearModelSpec, m0: f64, tau: f64) -> Result<LinearModelSpec, Box<dyn std::error::Error>> {
    let mut psi = DMatrix::zeros(2, 2);
    psi[(0, 0)] = 1.0 / (tau * tau);
    let spec = LinearModelSpec::new(base.x.clone(), base.y.clone(), base.sigma2, psi)?;
    Ok(spec.center_prior(&DVector::from_vec(vec![m0, 0.0]))?)
}

fn ratio(spec: &LinearModelSpec, seed: u64) -> Result<String, Box<dyn std::error::Error>> {
    let draws = exact_sampler(spec, 50_000, 10, seed)?;
    let r = influence_report(&draws.loglik, &InfluenceConfig::default())?;
    let flag = if r.conflict_flagged { " conflict" } else { "" };
    Ok(format!("{:.2} +- {:.2}{flag}", r.conflict_ratio.value, r.conflict_ratio.mcse))
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let n = 50;
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let x = DMatrix::from_fn(n, 2, |_, j| if j == 0 { 1.0 } else { StandardNormal.sample(&mut rng) });
    let y = DVector::from_fn(n, |i, _| 0.5 + 0.3 * x[(i, 1)] + Distribution::<f64>::sample(&StandardNormal, &mut rng));
    let base = LinearModelSpec::flat(x, y, 1.0)?;
    let ybar = base.y.mean();

    let tau = 0.1;
    println!("shifting the prior mean, tau = {tau}");
    for k in 0..=5 {
        println!("  m0 = ybar - {k} tau: {}", ratio(&with_prior(&base, ybar - k as f64 * tau, tau)?, k)?);
    }
    println!("tightening the prior at m0 = ybar - 0.5");
    for tau in [0.2, 0.1, 0.05, 0.025, 0.0125] {
        println!("  tau = {tau:<6}: {}", ratio(&with_prior(&base, ybar - 0.5, tau)?, 99)?);
    }
    Ok(())
}
