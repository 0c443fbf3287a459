use serde::{Deserialize, Serialize};

use super::{check_chains, check_unique, LogLikSamples, SampleError};

/// Predictive family for a replicate observation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    NormalKnownVar,
    Normal,
    Poisson,
    Binomial,
    Gamma,
}

impl Family {
    /// Column suffixes used in the predictive-draw CSV.
    pub fn param_names(self) -> &'static [&'static str] {
        match self {
            Family::NormalKnownVar | Family::Normal => &["mean", "var"],
            Family::Poisson => &["rate"],
            Family::Binomial => &["prob"],
            Family::Gamma => &["shape", "rate"],
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Family::NormalKnownVar => "normal_known_var",
            Family::Normal => "normal",
            Family::Poisson => "poisson",
            Family::Binomial => "binomial",
            Family::Gamma => "gamma",
        }
    }

    /// Builds a distribution from parameters listed in [`Family::param_names`] order.
    pub fn with_params(self, params: &[f64], trials: u32) -> Predictive {
        match self {
            Family::NormalKnownVar => Predictive::NormalKnownVar {
                mean: params[0],
                var: params[1],
            },
            Family::Normal => Predictive::Normal {
                mean: params[0],
                var: params[1],
            },
            Family::Poisson => Predictive::Poisson { rate: params[0] },
            Family::Binomial => Predictive::Binomial {
                prob: params[0],
                trials,
            },
            Family::Gamma => Predictive::Gamma {
                shape: params[0],
                rate: params[1],
            },
        }
    }
}

/// Predictive distribution of one replicate observation under one draw.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Predictive {
    /// Normal with a variance that is fixed across draws.
    NormalKnownVar { mean: f64, var: f64 },
    Normal { mean: f64, var: f64 },
    Poisson { rate: f64 },
    Binomial { prob: f64, trials: u32 },
    /// Gamma parameterized by shape and rate.
    Gamma { shape: f64, rate: f64 },
}

impl Predictive {
    pub fn family(&self) -> Family {
        match self {
            Predictive::NormalKnownVar { .. } => Family::NormalKnownVar,
            Predictive::Normal { .. } => Family::Normal,
            Predictive::Poisson { .. } => Family::Poisson,
            Predictive::Binomial { .. } => Family::Binomial,
            Predictive::Gamma { .. } => Family::Gamma,
        }
    }

    /// Parameter values in [`Family::param_names`] order.
    pub fn params(&self) -> Vec<f64> {
        match *self {
            Predictive::NormalKnownVar { mean, var } | Predictive::Normal { mean, var } => {
                vec![mean, var]
            }
            Predictive::Poisson { rate } => vec![rate],
            Predictive::Binomial { prob, .. } => vec![prob],
            Predictive::Gamma { shape, rate } => vec![shape, rate],
        }
    }

    pub fn trials(&self) -> u32 {
        match *self {
            Predictive::Binomial { trials, .. } => trials,
            _ => 1,
        }
    }

    /// Returns the first invalid parameter, if any.
    pub fn invalid_param(&self) -> Option<(&'static str, f64)> {
        let positive = |name, v: f64| (!(v.is_finite() && v > 0.0)).then_some((name, v));
        match *self {
            Predictive::NormalKnownVar { mean, var } | Predictive::Normal { mean, var } => {
                if !mean.is_finite() {
                    Some(("mean", mean))
                } else {
                    positive("var", var)
                }
            }
            Predictive::Poisson { rate } => positive("rate", rate),
            Predictive::Binomial { prob, trials } => {
                if !(prob > 0.0 && prob < 1.0) {
                    Some(("prob", prob))
                } else if trials == 0 {
                    Some(("trials", 0.0))
                } else {
                    None
                }
            }
            Predictive::Gamma { shape, rate } => {
                positive("shape", shape).or_else(|| positive("rate", rate))
            }
        }
    }
}

/// Per-draw, per-observation predictive parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictiveDraws {
    draws: Vec<Predictive>,
    n_draws: usize,
    draw_chain: Vec<u32>,
    obs_ids: Vec<String>,
}

impl PredictiveDraws {
    /// `draws` is row-major: draw `s`, observation `i` lives at `s * n + i`.
    pub fn new(
        draws: Vec<Predictive>,
        draw_chain: Vec<u32>,
        obs_ids: Vec<String>,
    ) -> Result<Self, SampleError> {
        let n = obs_ids.len();
        if n == 0 {
            return Err(SampleError::NoObservations);
        }
        let s = draw_chain.len();
        if draws.len() != s * n {
            return Err(SampleError::ShapeMismatch(format!(
                "{} parameter tuples for {s} draws x {n} observations",
                draws.len()
            )));
        }
        if s < 2 {
            return Err(SampleError::TooFewDraws(s));
        }
        check_unique(&obs_ids)?;
        check_chains(&draw_chain)?;
        for (k, p) in draws.iter().enumerate() {
            let (row, i) = (k / n, k % n);
            if let Some((param, value)) = p.invalid_param() {
                return Err(SampleError::InvalidParameter {
                    row: row + 1,
                    obs_id: obs_ids[i].clone(),
                    param,
                    value,
                });
            }
            let first = &draws[i];
            if row > 0 {
                let reason = if p.family() != first.family() {
                    Some(format!(
                        "family {} at draw {} differs from {}",
                        p.family().name(),
                        row + 1,
                        first.family().name()
                    ))
                } else if p.trials() != first.trials() {
                    Some(format!("trial count changes at draw {}", row + 1))
                } else {
                    match (p, first) {
                        (
                            Predictive::NormalKnownVar { var: a, .. },
                            Predictive::NormalKnownVar { var: b, .. },
                        ) if a != b => Some(format!("known variance changes at draw {}", row + 1)),
                        _ => None,
                    }
                };
                if let Some(reason) = reason {
                    return Err(SampleError::FamilyMismatch {
                        obs_id: obs_ids[i].clone(),
                        reason,
                    });
                }
            }
        }
        Ok(Self {
            draws,
            n_draws: s,
            draw_chain,
            obs_ids,
        })
    }

    pub fn n_draws(&self) -> usize {
        self.n_draws
    }

    pub fn n_obs(&self) -> usize {
        self.obs_ids.len()
    }

    pub fn obs_ids(&self) -> &[String] {
        &self.obs_ids
    }

    pub fn draw_chain(&self) -> &[u32] {
        &self.draw_chain
    }

    pub fn get(&self, draw: usize, obs: usize) -> &Predictive {
        &self.draws[draw * self.n_obs() + obs]
    }

    pub fn family(&self, obs: usize) -> Family {
        self.draws[obs].family()
    }

    pub fn trials(&self, obs: usize) -> u32 {
        self.draws[obs].trials()
    }

    pub fn replicate_blocks(&self) -> Vec<Vec<usize>> {
        super::replicate_blocks(&self.draw_chain)
    }

    /// Checks that both inputs describe the same draws and observations.
    pub fn check_aligned(&self, samples: &LogLikSamples) -> Result<(), SampleError> {
        if self.n_draws != samples.n_draws() {
            return Err(SampleError::ShapeMismatch(format!(
                "{} predictive draws vs {} log-likelihood draws",
                self.n_draws,
                samples.n_draws()
            )));
        }
        if self.obs_ids != samples.obs_ids() {
            return Err(SampleError::ShapeMismatch(
                "observation ids differ".to_string(),
            ));
        }
        if self.draw_chain != samples.draw_chain() {
            return Err(SampleError::ShapeMismatch(
                "chain labels differ".to_string(),
            ));
        }
        Ok(())
    }
}
