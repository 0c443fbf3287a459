use rand::Rng;
use rand_distr::{Binomial, Distribution, Gamma, Normal, Poisson};
use statrs::function::gamma::{digamma, ln_gamma};

use super::LeverageError;
use crate::sample_store::Predictive;
use crate::stats::{self, Estimate};

/// Closed-form `KL(p || q)` in nats between two predictive distributions
/// of the same family.
pub fn family_kl(p: &Predictive, q: &Predictive) -> Result<f64, LeverageError> {
    for d in [p, q] {
        if let Some((param, value)) = d.invalid_param() {
            return Err(LeverageError::InvalidParameter { param, value });
        }
    }
    let kl = match (*p, *q) {
        (
            Predictive::NormalKnownVar { mean: m1, var: v1 },
            Predictive::NormalKnownVar { mean: m2, var: v2 },
        ) => {
            if v1 != v2 {
                return Err(LeverageError::FamilyMismatch(format!(
                    "known variances differ ({v1} vs {v2})"
                )));
            }
            (m1 - m2).powi(2) / (2.0 * v1)
        }
        (Predictive::Normal { mean: m1, var: v1 }, Predictive::Normal { mean: m2, var: v2 }) => {
            0.5 * (v2 / v1).ln() + (v1 + (m1 - m2).powi(2)) / (2.0 * v2) - 0.5
        }
        (Predictive::Poisson { rate: l1 }, Predictive::Poisson { rate: l2 }) => {
            l1 * (l1 / l2).ln() - l1 + l2
        }
        (
            Predictive::Binomial { prob: p1, trials: m1 },
            Predictive::Binomial { prob: p2, trials: m2 },
        ) => {
            if m1 != m2 {
                return Err(LeverageError::FamilyMismatch(format!(
                    "trial counts differ ({m1} vs {m2})"
                )));
            }
            m1 as f64 * (p1 * (p1 / p2).ln() + (1.0 - p1) * ((1.0 - p1) / (1.0 - p2)).ln())
        }
        (
            Predictive::Gamma { shape: a1, rate: b1 },
            Predictive::Gamma { shape: a2, rate: b2 },
        ) => {
            (a1 - a2) * digamma(a1) - ln_gamma(a1) + ln_gamma(a2) + a2 * (b1 / b2).ln()
                + a1 * (b2 - b1) / b1
        }
        _ => {
            return Err(LeverageError::FamilyMismatch(format!(
                "{} vs {}",
                p.family().name(),
                q.family().name()
            )))
        }
    };
    // rounding can leave tiny negatives when p and q nearly coincide
    Ok(kl.max(0.0))
}

/// Unbiased Monte Carlo KL from replicate log-densities.
///
/// `logp1[r]` and `logp2[r]` are both log-densities evaluated at the same
/// replicate `y_r ~ p1`. Returns the mean difference and its standard error.
pub fn mc_kl(logp1: &[f64], logp2: &[f64]) -> Result<Estimate, LeverageError> {
    if logp1.is_empty() || logp1.len() != logp2.len() {
        return Err(LeverageError::NoReplicates);
    }
    let d: Vec<f64> = logp1.iter().zip(logp2).map(|(a, b)| a - b).collect();
    let se = (stats::variance(&d) / d.len() as f64).sqrt();
    Ok(Estimate::new(stats::mean(&d), se))
}

/// A predictive distribution that can be sampled and evaluated, which is
/// all the replicate route needs.
pub trait ReplicateDensity {
    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64;
    fn log_density(&self, y: f64) -> f64;
}

impl ReplicateDensity for Predictive {
    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            Predictive::NormalKnownVar { mean, var } | Predictive::Normal { mean, var } => {
                Normal::new(mean, var.sqrt()).expect("validated").sample(rng)
            }
            Predictive::Poisson { rate } => Poisson::new(rate).expect("validated").sample(rng),
            Predictive::Binomial { prob, trials } => {
                Binomial::new(trials as u64, prob).expect("validated").sample(rng) as f64
            }
            Predictive::Gamma { shape, rate } => {
                Gamma::new(shape, 1.0 / rate).expect("validated").sample(rng)
            }
        }
    }

    fn log_density(&self, y: f64) -> f64 {
        match *self {
            Predictive::NormalKnownVar { mean, var } | Predictive::Normal { mean, var } => {
                -0.5 * (2.0 * std::f64::consts::PI * var).ln() - (y - mean).powi(2) / (2.0 * var)
            }
            Predictive::Poisson { rate } => y * rate.ln() - rate - ln_gamma(y + 1.0),
            Predictive::Binomial { prob, trials } => {
                let m = trials as f64;
                ln_gamma(m + 1.0) - ln_gamma(y + 1.0) - ln_gamma(m - y + 1.0)
                    + y * prob.ln()
                    + (m - y) * (-prob).ln_1p()
            }
            Predictive::Gamma { shape, rate } => {
                shape * rate.ln() - ln_gamma(shape) + (shape - 1.0) * y.ln() - rate * y
            }
        }
    }
}

/// Draws `r` replicates from `p` and estimates `KL(p || q)` with [`mc_kl`].
pub fn replicate_kl<D, R>(p: &D, q: &D, r: usize, rng: &mut R) -> Result<Estimate, LeverageError>
where
    D: ReplicateDensity + ?Sized,
    R: Rng + ?Sized,
{
    let mut lp = Vec::with_capacity(r);
    let mut lq = Vec::with_capacity(r);
    for _ in 0..r {
        let y = p.sample(rng);
        lp.push(p.log_density(y));
        lq.push(q.log_density(y));
    }
    mc_kl(&lp, &lq)
}
