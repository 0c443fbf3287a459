//! Bayesian hat-values from pairs of independent posterior draws.
//!
//! `h_i = E[KL(p(y_i^rep | theta1) || p(y_i^rep | theta2))]` over
//! independent `theta1, theta2`. Draws are split into two streams (even- and
//! odd-ranked chains, or the two halves of a single chain), each stream is
//! shuffled with a seeded generator, and the m-th draws are paired.

mod kl;

use std::io::Write;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

pub use kl::{family_kl, mc_kl, replicate_kl, ReplicateDensity};

use crate::influence::Perturbation;
use crate::sample_store::{fmt_num, GroupMap, Predictive, PredictiveDraws, SampleError};
use crate::stats::{self, Estimate};

pub const DEFAULT_REPLICATES: usize = 64;

#[derive(Debug, Error)]
pub enum LeverageError {
    #[error("each draw stream needs at least 2 draws, found {0}")]
    SingleDraw(usize),
    #[error("family mismatch: {0}")]
    FamilyMismatch(String),
    #[error("invalid parameter {param} = {value}")]
    InvalidParameter { param: &'static str, value: f64 },
    #[error("no replicate draws supplied")]
    NoReplicates,
    #[error("sum of hat-values is zero")]
    ZeroLeverage,
    #[error("perturbation direction is all zeros")]
    ZeroPerturbation,
    #[error("perturbation has {found} entries for {expected} observations")]
    DimensionMismatch { expected: usize, found: usize },
    #[error(transparent)]
    Sample(#[from] SampleError),
}

impl LeverageError {
    pub fn code(&self) -> &'static str {
        match self {
            Self::SingleDraw(_) => "SingleDraw",
            Self::FamilyMismatch(_) => "FamilyMismatch",
            Self::InvalidParameter { .. } => "InvalidParameter",
            Self::NoReplicates => "NoReplicates",
            Self::ZeroLeverage => "ZeroLeverage",
            Self::ZeroPerturbation => "ZeroPerturbation",
            Self::DimensionMismatch { .. } => "DimensionMismatch",
            Self::Sample(e) => e.code(),
        }
    }
}

/// How the per-pair divergence is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KlMethod {
    ClosedForm,
    /// Monte Carlo with this many replicates per pair and observation.
    Replicates(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LeverageConfig {
    pub seed: u64,
    /// Average both KL directions instead of stream 1 against stream 2.
    pub symmetrize: bool,
    pub method: KlMethod,
}

impl Default for LeverageConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            symmetrize: false,
            method: KlMethod::ClosedForm,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct HatValues {
    pub obs_ids: Vec<String>,
    pub h: Vec<f64>,
    pub mcse: Vec<f64>,
    pub p_d_star: Estimate,
    pub cllev: Vec<f64>,
    pub n_pairs: usize,
    /// Negative replicate estimates set to zero, per observation.
    pub floored: Vec<usize>,
    /// True when the two streams are halves of one chain.
    pub split_half: bool,
}

impl HatValues {
    /// Builds from plain values, e.g. exact hat-matrix diagonals.
    pub fn from_values(obs_ids: Vec<String>, h: Vec<f64>) -> Result<Self, LeverageError> {
        if obs_ids.len() != h.len() {
            return Err(LeverageError::DimensionMismatch {
                expected: obs_ids.len(),
                found: h.len(),
            });
        }
        if let Some(&v) = h.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(LeverageError::InvalidParameter { param: "h", value: v });
        }
        let n = h.len();
        Ok(finish(obs_ids, h, vec![0.0; n], Estimate::new(0.0, 0.0), 0, vec![0; n], false))
    }

    pub fn n(&self) -> usize {
        self.h.len()
    }

    pub fn write_csv<W: Write>(&self, w: W) -> std::io::Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["obs_id", "h", "h_mcse", "cllev", "floored"])?;
        for i in 0..self.n() {
            wtr.write_record([
                self.obs_ids[i].clone(),
                fmt_num(self.h[i]),
                fmt_num(self.mcse[i]),
                fmt_num(self.cllev[i]),
                self.floored[i].to_string(),
            ])?;
        }
        wtr.flush()
    }
}

fn finish(
    obs_ids: Vec<String>,
    h: Vec<f64>,
    mcse: Vec<f64>,
    mut p_d_star: Estimate,
    n_pairs: usize,
    floored: Vec<usize>,
    split_half: bool,
) -> HatValues {
    let total: f64 = h.iter().sum();
    p_d_star.value = total;
    let cllev = if total > 0.0 {
        h.iter().map(|v| v / total).collect()
    } else {
        vec![f64::NAN; h.len()]
    };
    HatValues {
        obs_ids,
        h,
        mcse,
        p_d_star,
        cllev,
        n_pairs,
        floored,
        split_half,
    }
}

/// Splits draw indices into two streams.
///
/// Chains are ranked by label; even ranks feed stream 1 and odd ranks
/// stream 2. A single chain is cut into halves.
pub fn draw_streams(draw_chain: &[u32]) -> (Vec<usize>, Vec<usize>, bool) {
    let mut labels: Vec<u32> = draw_chain.to_vec();
    labels.sort_unstable();
    labels.dedup();
    if labels.len() < 2 {
        let half = draw_chain.len() / 2;
        return ((0..half).collect(), (half..2 * half).collect(), true);
    }
    let (mut a, mut b) = (Vec::new(), Vec::new());
    for (s, c) in draw_chain.iter().enumerate() {
        let rank = labels.binary_search(c).expect("label present");
        if rank % 2 == 0 {
            a.push(s);
        } else {
            b.push(s);
        }
    }
    (a, b, false)
}

/// Seeded pairing of two streams, truncated to the shorter one.
pub fn pair_draws(draw_chain: &[u32], seed: u64) -> (Vec<(usize, usize)>, bool) {
    let (mut a, mut b, split) = draw_streams(draw_chain);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    a.shuffle(&mut rng);
    b.shuffle(&mut rng);
    (a.into_iter().zip(b).collect(), split)
}

/// Estimates hat-values for every observation.
pub fn hat_values(
    pred: &PredictiveDraws,
    config: &LeverageConfig,
) -> Result<HatValues, LeverageError> {
    let (pairs, split_half) = pair_draws(pred.draw_chain(), config.seed);
    if pairs.len() < 2 {
        return Err(LeverageError::SingleDraw(pairs.len()));
    }
    let n = pred.n_obs();
    let m = pairs.len();

    // kl[i][m]: divergence of observation i under pair m
    let per_obs: Vec<(Vec<f64>, usize)> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
            rng.set_stream(i as u64 + 1);
            let mut floored = 0;
            let mut one = |p: &Predictive, q: &Predictive, rng: &mut ChaCha8Rng| -> Result<f64, LeverageError> {
                match config.method {
                    KlMethod::ClosedForm => family_kl(p, q),
                    KlMethod::Replicates(r) => {
                        let est = replicate_kl(p, q, r, rng)?.value;
                        if est < 0.0 {
                            floored += 1;
                            Ok(0.0)
                        } else {
                            Ok(est)
                        }
                    }
                }
            };
            let mut out = Vec::with_capacity(m);
            for &(s1, s2) in &pairs {
                let (p, q) = (pred.get(s1, i), pred.get(s2, i));
                let k = if config.symmetrize {
                    0.5 * (one(p, q, &mut rng)? + one(q, p, &mut rng)?)
                } else {
                    one(p, q, &mut rng)?
                };
                out.push(k);
            }
            Ok((out, floored))
        })
        .collect::<Result<_, LeverageError>>()?;

    let root_m = (m as f64).sqrt();
    let h: Vec<f64> = per_obs.iter().map(|(k, _)| stats::mean(k)).collect();
    let mcse = per_obs
        .iter()
        .map(|(k, _)| (stats::variance(k)).sqrt() / root_m)
        .collect();
    let pair_totals: Vec<f64> = (0..m)
        .map(|j| per_obs.iter().map(|(k, _)| k[j]).sum())
        .collect();
    let p_d_se = stats::variance(&pair_totals).sqrt() / root_m;
    let floored = per_obs.iter().map(|(_, f)| *f).collect();
    Ok(finish(
        pred.obs_ids().to_vec(),
        h,
        mcse,
        Estimate::new(0.0, p_d_se),
        m,
        floored,
        split_half,
    ))
}

/// Conformal local leverage of direction `eps`.
pub fn cllev_direction(h: &HatValues, eps: &Perturbation) -> Result<f64, LeverageError> {
    if eps.len() != h.n() {
        return Err(LeverageError::DimensionMismatch {
            expected: h.n(),
            found: eps.len(),
        });
    }
    let norm = eps.norm_sq();
    if norm == 0.0 {
        return Err(LeverageError::ZeroPerturbation);
    }
    let total = h.p_d_star.value;
    if !(total > 0.0) {
        return Err(LeverageError::ZeroLeverage);
    }
    let quad: f64 = h
        .h
        .iter()
        .zip(eps.as_slice())
        .map(|(hi, e)| hi * e * e)
        .sum();
    Ok(quad / (total * norm))
}

/// Leverage of each group: the sum of its members' hat-values.
pub fn group_leverage(h: &HatValues, groups: &GroupMap) -> Result<Vec<(String, f64)>, LeverageError> {
    let members = groups.members(&h.obs_ids)?;
    Ok(groups
        .groups()
        .iter()
        .zip(members)
        .map(|(g, cols)| (g.clone(), cols.iter().map(|&i| h.h[i]).sum()))
        .collect())
}
