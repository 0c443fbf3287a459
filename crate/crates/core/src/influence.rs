//! Influence diagnostics from the posterior covariance of log-likelihood
//! contributions.
//!
//! Case-weight perturbations `w = 1 + eps` change the posterior by a
//! divergence that is locally `eps' V eps` (up to a constant), where
//! `V_ij = Cov(log p(y_i | theta), log p(y_j | theta) | y)`. Everything in
//! this module is a function of the draws of those contributions:
//!
//! * `LINF_i = V_ii`, summing to the WAIC penalty `p_W`;
//! * `DINF_i = 2 (log E[p(y_i|theta)] - E[log p(y_i|theta)])`, the KL effect
//!   of doubling a case weight, summing to the alternate penalty `p_W*`;
//! * `p_V = 2 Var(sum_i log p(y_i|theta)) = 2 * 1'V1`;
//! * conformal influence `CLINF(eps) = eps'V eps / (tr(V) eps'eps)`;
//! * the prior-data conflict ratio `p_V / p_W` and its per-group version.
//!
//! Point estimates pool all chains. Standard errors come from recomputing
//! each statistic on every chain separately (first and second halves when
//! there is only one chain).

use std::io::Write;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::sample_store::{fmt_num, GroupMap, LogLikSamples, SampleError};
use crate::stats::{self, Estimate};

/// Default `p_V / p_W` level at which a report is flagged.
pub const DEFAULT_CONFLICT_THRESHOLD: f64 = 3.0;

#[derive(Debug, Error)]
pub enum InfluenceError {
    #[error("need at least 2 draws, found {0}")]
    DegenerateSample(usize),
    #[error("trace of V is zero: every log-likelihood contribution is constant across draws")]
    ZeroTrace,
    #[error("perturbation direction is all zeros")]
    ZeroPerturbation,
    #[error("perturbation has {found} entries for {expected} observations")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("observation {obs}: count {y} outside 0..={trials}")]
    CountOutOfRange { obs: usize, y: u32, trials: u32 },
    #[error("probability {value} at draw {draw}, observation {obs} is outside (0, 1)")]
    ProbabilityOutOfRange { draw: usize, obs: usize, value: f64 },
    #[error(transparent)]
    Sample(#[from] SampleError),
}

impl InfluenceError {
    pub fn code(&self) -> &'static str {
        match self {
            Self::DegenerateSample(_) => "DegenerateSample",
            Self::ZeroTrace => "ZeroTrace",
            Self::ZeroPerturbation => "ZeroPerturbation",
            Self::DimensionMismatch { .. } => "DimensionMismatch",
            Self::CountOutOfRange { .. } => "CountOutOfRange",
            Self::ProbabilityOutOfRange { .. } => "ProbabilityOutOfRange",
            Self::Sample(e) => e.code(),
        }
    }
}

/// Symmetric covariance matrix of log-likelihood contributions.
#[derive(Debug, Clone, PartialEq)]
pub struct CovMatrix {
    matrix: DMatrix<f64>,
    obs_ids: Vec<String>,
}

impl CovMatrix {
    /// Wraps a square matrix, symmetrizing it as `(V + V') / 2`.
    pub fn new(matrix: DMatrix<f64>, obs_ids: Vec<String>) -> Result<Self, InfluenceError> {
        if !matrix.is_square() || matrix.nrows() != obs_ids.len() {
            return Err(InfluenceError::DimensionMismatch {
                expected: obs_ids.len(),
                found: matrix.nrows(),
            });
        }
        let sym = (&matrix + matrix.transpose()) * 0.5;
        Ok(Self {
            matrix: sym,
            obs_ids,
        })
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn obs_ids(&self) -> &[String] {
        &self.obs_ids
    }

    pub fn n(&self) -> usize {
        self.obs_ids.len()
    }

    pub fn trace(&self) -> f64 {
        (0..self.n()).map(|i| self.matrix[(i, i)]).sum()
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n()).map(|i| self.matrix[(i, i)]).collect()
    }

    /// `1' V 1`.
    pub fn total(&self) -> f64 {
        self.matrix.iter().sum()
    }

    /// `CLINF_i = V_ii / tr(V)` for every observation.
    pub fn clinf(&self) -> Result<Vec<f64>, InfluenceError> {
        let tr = self.trace();
        if !(tr > 0.0) {
            return Err(InfluenceError::ZeroTrace);
        }
        Ok(self.diagonal().into_iter().map(|v| v / tr).collect())
    }
}

/// A perturbation direction `eps` of the case weights, `w = 1 + eps`.
#[derive(Debug, Clone, PartialEq)]
pub struct Perturbation(Vec<f64>);

impl Perturbation {
    pub fn new(eps: Vec<f64>) -> Result<Self, InfluenceError> {
        if eps.iter().all(|&e| e == 0.0) {
            return Err(InfluenceError::ZeroPerturbation);
        }
        Ok(Self(eps))
    }

    /// Standard basis vector `delta^i` of length `n`.
    pub fn basis(n: usize, i: usize) -> Self {
        let mut v = vec![0.0; n];
        v[i] = 1.0;
        Self(v)
    }

    /// All-ones vector: the same perturbation applied to every observation.
    pub fn ones(n: usize) -> Self {
        Self(vec![1.0; n])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn norm_sq(&self) -> f64 {
        self.0.iter().map(|e| e * e).sum()
    }

    pub(crate) fn check_len(&self, n: usize) -> Result<(), InfluenceError> {
        if self.len() != n {
            return Err(InfluenceError::DimensionMismatch {
                expected: n,
                found: self.len(),
            });
        }
        Ok(())
    }
}

fn require_draws(samples: &LogLikSamples) -> Result<(), InfluenceError> {
    if samples.n_draws() < 2 {
        return Err(InfluenceError::DegenerateSample(samples.n_draws()));
    }
    Ok(())
}

/// Unbiased covariance of the log-likelihood columns, all chains pooled.
pub fn loglik_covariance(samples: &LogLikSamples) -> Result<CovMatrix, InfluenceError> {
    require_draws(samples)?;
    let (s, n) = (samples.n_draws(), samples.n_obs());
    let mut centered = DMatrix::<f64>::zeros(s, n);
    for (i, col) in samples.columns().enumerate() {
        let m = stats::mean(col);
        for (dst, v) in centered.column_mut(i).iter_mut().zip(col) {
            *dst = v - m;
        }
    }
    let mut v = centered.tr_mul(&centered) / (s - 1) as f64;
    // diagonal from the same accumulation as `linf`
    for (i, d) in linf(samples)?.into_iter().enumerate() {
        v[(i, i)] = d;
    }
    CovMatrix::new(v, samples.obs_ids().to_vec())
}

/// `LINF_i = Var(log p(y_i | theta))`.
pub fn linf(samples: &LogLikSamples) -> Result<Vec<f64>, InfluenceError> {
    require_draws(samples)?;
    Ok((0..samples.n_obs())
        .into_par_iter()
        .map(|i| stats::variance(samples.column(i)))
        .collect())
}

/// `DINF_i = 2 (log mean exp(l_i) - mean(l_i))`.
pub fn dinf(samples: &LogLikSamples) -> Result<Vec<f64>, InfluenceError> {
    require_draws(samples)?;
    Ok((0..samples.n_obs())
        .into_par_iter()
        .map(|i| stats::doubled_jensen_gap(samples.column(i)))
        .collect())
}

/// WAIC penalty `p_W = sum_i LINF_i`.
pub fn p_w(samples: &LogLikSamples) -> Result<f64, InfluenceError> {
    Ok(linf(samples)?.iter().sum())
}

/// Alternate WAIC penalty `p_W* = sum_i DINF_i`.
pub fn p_w_star(samples: &LogLikSamples) -> Result<f64, InfluenceError> {
    Ok(dinf(samples)?.iter().sum())
}

/// `p_V = 2 Var(sum_i log p(y_i | theta))`.
pub fn p_v(samples: &LogLikSamples) -> Result<f64, InfluenceError> {
    require_draws(samples)?;
    Ok(2.0 * stats::variance(&samples.row_sums()))
}

/// Conformal local influence of direction `eps`.
pub fn clinf_direction(v: &CovMatrix, eps: &Perturbation) -> Result<f64, InfluenceError> {
    eps.check_len(v.n())?;
    let tr = v.trace();
    if !(tr > 0.0) {
        return Err(InfluenceError::ZeroTrace);
    }
    let e = DVector::from_column_slice(eps.as_slice());
    let quad = e.dot(&(v.matrix() * &e));
    Ok(quad / (tr * eps.norm_sq()))
}

/// Prior-data conflict ratio `p_V / p_W`.
pub fn conflict_ratio(samples: &LogLikSamples) -> Result<f64, InfluenceError> {
    let pw = p_w(samples)?;
    if !(pw > 0.0) {
        return Err(InfluenceError::ZeroTrace);
    }
    Ok(p_v(samples)? / pw)
}

/// Cross-conflict of one group of observations.
#[derive(Debug)]
pub struct GroupConflict {
    pub group: String,
    pub n_members: usize,
    /// `factor * Var(sum of member contributions)`.
    pub p_v: f64,
    /// Sum of member variances.
    pub p_w: f64,
    pub ratio: Result<Estimate, InfluenceError>,
}

/// Per-group `p_V / p_W`.
///
/// `pv_factor` toggles the factor 2 carried by the global `p_V`. With it,
/// a singleton group has ratio exactly 2.
pub fn cross_conflict(
    samples: &LogLikSamples,
    groups: &GroupMap,
    pv_factor: bool,
) -> Result<Vec<GroupConflict>, InfluenceError> {
    require_draws(samples)?;
    let members = groups.members(samples.obs_ids())?;
    let factor = if pv_factor { 2.0 } else { 1.0 };
    let blocks = samples.replicate_blocks();
    let linf_all = linf(samples)?;
    let per_block_var: Vec<Vec<f64>> = blocks
        .iter()
        .map(|b| {
            (0..samples.n_obs())
                .map(|i| stats::variance_at(samples.column(i), b))
                .collect()
        })
        .collect();
    let out = members
        .iter()
        .zip(groups.groups())
        .map(|(cols, label)| {
            let mut sums = vec![0.0; samples.n_draws()];
            for &i in cols {
                for (a, v) in sums.iter_mut().zip(samples.column(i)) {
                    *a += v;
                }
            }
            let p_v = factor * stats::variance(&sums);
            let p_w: f64 = cols.iter().map(|&i| linf_all[i]).sum();
            let ratio = if p_w > 0.0 {
                let reps: Vec<f64> = blocks
                    .iter()
                    .zip(&per_block_var)
                    .map(|(b, vars)| {
                        let w: f64 = cols.iter().map(|&i| vars[i]).sum();
                        factor * stats::variance_at(&sums, b) / w
                    })
                    .collect();
                Ok(Estimate::new(p_v / p_w, stats::replicate_se(&reps)))
            } else {
                Err(InfluenceError::ZeroTrace)
            };
            GroupConflict {
                group: label.clone(),
                n_members: cols.len(),
                p_v,
                p_w,
                ratio,
            }
        })
        .collect();
    Ok(out)
}

/// Which perturbation unit a binomial observation contributes to `p_W`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinomialVariant {
    /// The binomial count is the smallest unit.
    Binomial,
    /// Each of the `m_i` Bernoulli trials is perturbed separately.
    Bernoulli,
}

/// Per-observation `p_W` contributions for binomial data.
///
/// `pi_draws[s][i]` is the success probability of observation `i` under draw `s`.
pub fn binomial_pw(
    y: &[u32],
    m: &[u32],
    pi_draws: &[Vec<f64>],
    variant: BinomialVariant,
) -> Result<Vec<f64>, InfluenceError> {
    let n = y.len();
    if m.len() != n {
        return Err(InfluenceError::DimensionMismatch {
            expected: n,
            found: m.len(),
        });
    }
    if pi_draws.len() < 2 {
        return Err(InfluenceError::DegenerateSample(pi_draws.len()));
    }
    for (i, (&yi, &mi)) in y.iter().zip(m).enumerate() {
        if yi > mi {
            return Err(InfluenceError::CountOutOfRange {
                obs: i,
                y: yi,
                trials: mi,
            });
        }
    }
    for (s, row) in pi_draws.iter().enumerate() {
        if row.len() != n {
            return Err(InfluenceError::DimensionMismatch {
                expected: n,
                found: row.len(),
            });
        }
        if let Some(i) = row.iter().position(|&p| !(p > 0.0 && p < 1.0)) {
            return Err(InfluenceError::ProbabilityOutOfRange {
                draw: s,
                obs: i,
                value: row[i],
            });
        }
    }
    Ok((0..n)
        .map(|i| {
            let (yi, fail) = (y[i] as f64, (m[i] - y[i]) as f64);
            let log_p: Vec<f64> = pi_draws.iter().map(|r| r[i].ln()).collect();
            let log_q: Vec<f64> = pi_draws.iter().map(|r| (-r[i]).ln_1p()).collect();
            match variant {
                BinomialVariant::Binomial => {
                    let l: Vec<f64> = log_p
                        .iter()
                        .zip(&log_q)
                        .map(|(a, b)| yi * a + fail * b)
                        .collect();
                    stats::variance(&l)
                }
                BinomialVariant::Bernoulli => {
                    yi * stats::variance(&log_p) + fail * stats::variance(&log_q)
                }
            }
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InfluenceConfig {
    /// `p_V / p_W` at or above this value sets [`InfluenceReport::conflict_flagged`].
    pub conflict_threshold: f64,
}

impl Default for InfluenceConfig {
    fn default() -> Self {
        Self {
            conflict_threshold: DEFAULT_CONFLICT_THRESHOLD,
        }
    }
}

/// All influence-side diagnostics for one set of draws.
#[derive(Debug, Clone, Serialize)]
pub struct InfluenceReport {
    pub obs_ids: Vec<String>,
    pub linf: Vec<Estimate>,
    pub dinf: Vec<Estimate>,
    pub clinf: Vec<Estimate>,
    pub p_w: Estimate,
    pub p_w_star: Estimate,
    pub p_v: Estimate,
    pub conflict_ratio: Estimate,
    pub conflict_threshold: f64,
    pub conflict_flagged: bool,
    pub n_draws: usize,
    pub n_replicates: usize,
}

struct PointSet {
    linf: Vec<f64>,
    dinf: Vec<f64>,
    p_v: f64,
}

fn point_set(samples: &LogLikSamples, rows: Option<&[usize]>, sums: &[f64]) -> PointSet {
    let n = samples.n_obs();
    let (linf, dinf) = match rows {
        None => (0..n)
            .into_par_iter()
            .map(|i| {
                let c = samples.column(i);
                (stats::variance(c), stats::doubled_jensen_gap(c))
            })
            .unzip(),
        Some(idx) => (0..n)
            .into_par_iter()
            .map(|i| {
                let c = samples.column(i);
                (stats::variance_at(c, idx), stats::doubled_jensen_gap_at(c, idx))
            })
            .unzip(),
    };
    let p_v = 2.0
        * match rows {
            None => stats::variance(sums),
            Some(idx) => stats::variance_at(sums, idx),
        };
    PointSet { linf, dinf, p_v }
}

/// Computes every influence diagnostic with Monte Carlo standard errors.
pub fn influence_report(
    samples: &LogLikSamples,
    config: &InfluenceConfig,
) -> Result<InfluenceReport, InfluenceError> {
    require_draws(samples)?;
    let sums = samples.row_sums();
    let full = point_set(samples, None, &sums);
    let p_w: f64 = full.linf.iter().sum();
    if !(p_w > 0.0) {
        return Err(InfluenceError::ZeroTrace);
    }
    let p_w_star: f64 = full.dinf.iter().sum();

    let blocks = samples.replicate_blocks();
    let reps: Vec<PointSet> = blocks
        .iter()
        .map(|b| point_set(samples, Some(b), &sums))
        .collect();
    let se_of = |f: &dyn Fn(&PointSet) -> f64| -> f64 {
        let vals: Vec<f64> = reps.iter().map(f).collect();
        stats::replicate_se(&vals)
    };
    let n = samples.n_obs();
    let per_obs = |point: &[f64], f: &dyn Fn(&PointSet, usize) -> f64| -> Vec<Estimate> {
        (0..n)
            .map(|i| Estimate::new(point[i], se_of(&|r| f(r, i))))
            .collect()
    };
    let linf = per_obs(&full.linf, &|r, i| r.linf[i]);
    let dinf = per_obs(&full.dinf, &|r, i| r.dinf[i]);
    let clinf_point: Vec<f64> = full.linf.iter().map(|v| v / p_w).collect();
    let clinf = per_obs(&clinf_point, &|r, i| {
        r.linf[i] / r.linf.iter().sum::<f64>()
    });
    let ratio = full.p_v / p_w;
    Ok(InfluenceReport {
        obs_ids: samples.obs_ids().to_vec(),
        linf,
        dinf,
        clinf,
        p_w: Estimate::new(p_w, se_of(&|r| r.linf.iter().sum())),
        p_w_star: Estimate::new(p_w_star, se_of(&|r| r.dinf.iter().sum())),
        p_v: Estimate::new(full.p_v, se_of(&|r| r.p_v)),
        conflict_ratio: Estimate::new(ratio, se_of(&|r| r.p_v / r.linf.iter().sum::<f64>())),
        conflict_threshold: config.conflict_threshold,
        conflict_flagged: ratio >= config.conflict_threshold,
        n_draws: samples.n_draws(),
        n_replicates: blocks.len(),
    })
}

impl InfluenceReport {
    /// Tidy per-observation table.
    pub fn write_csv<W: Write>(&self, w: W) -> std::io::Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record([
            "obs_id",
            "linf",
            "linf_mcse",
            "dinf",
            "dinf_mcse",
            "clinf",
            "clinf_mcse",
        ])?;
        for i in 0..self.obs_ids.len() {
            let mut rec = vec![self.obs_ids[i].clone()];
            for e in [self.linf[i], self.dinf[i], self.clinf[i]] {
                rec.push(fmt_num(e.value));
                rec.push(fmt_num(e.mcse));
            }
            wtr.write_record(&rec)?;
        }
        wtr.flush()
    }

    /// Totals footer: one row per summary statistic.
    pub fn write_totals_csv<W: Write>(&self, w: W) -> std::io::Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["statistic", "estimate", "mcse"])?;
        for (name, e) in [
            ("p_w", self.p_w),
            ("p_w_star", self.p_w_star),
            ("p_v", self.p_v),
            ("conflict_ratio", self.conflict_ratio),
        ] {
            wtr.write_record([name.to_string(), fmt_num(e.value), fmt_num(e.mcse)])?;
        }
        wtr.flush()
    }
}
