//! Conjugate normal linear model with known variance.
//!
//! `y ~ N(X theta, sigma2 I)` with prior `theta ~ N(0, Psi^{-1})`. Every
//! diagnostic has a closed form here, which makes the model the reference
//! for the Monte Carlo estimators, and it can be sampled exactly.
//!
//! With `A = Psi sigma2 + X'X`: `H = X A^{-1} X'`, the posterior mean is
//! `A^{-1} X'y` and the posterior covariance is `sigma2 A^{-1}`.
//! A nonzero prior mean `m0` reduces to this case by replacing `y` with
//! `y - X m0` (see [`LinearModelSpec::center_prior`]).

use std::io::Write;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;
use thiserror::Error;

use crate::eigen::jacobi_eigen;
use crate::influence::CovMatrix;
use crate::sample_store::{fmt_num, LogLikSamples, Predictive, PredictiveDraws, SampleError};

/// Largest accepted condition number of a generated design matrix.
pub const MAX_CONDITION: f64 = 1e6;

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("Psi sigma2 + X'X is not positive definite")]
    SingularSystem,
    #[error("non-finite value in {0}")]
    NonFiniteInput(&'static str),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("index {index} out of range for {n} observations")]
    IndexOutOfRange { index: usize, n: usize },
    #[error("invalid anomaly request: {0}")]
    InvalidAnomaly(String),
    #[error("invalid sampler request: {0}")]
    InvalidSampler(String),
    /// Reserved for generator misuse that would break reproducibility.
    #[error("bad seed: {0}")]
    BadSeed(String),
    #[error(transparent)]
    Sample(#[from] SampleError),
}

impl OracleError {
    pub fn code(&self) -> &'static str {
        match self {
            Self::SingularSystem => "SingularSystem",
            Self::NonFiniteInput(_) => "NonFiniteInput",
            Self::DimensionMismatch(_) => "DimensionMismatch",
            Self::IndexOutOfRange { .. } => "IndexOutOfRange",
            Self::InvalidAnomaly(_) => "InvalidAnomaly",
            Self::InvalidSampler(_) => "InvalidSampler",
            Self::BadSeed(_) => "BadSeed",
            Self::Sample(e) => e.code(),
        }
    }
}

#[derive(Serialize, Deserialize)]
struct SpecJson {
    #[serde(rename = "X")]
    x: Vec<Vec<f64>>,
    y: Vec<f64>,
    sigma2: f64,
    #[serde(rename = "Psi", default, skip_serializing_if = "Option::is_none")]
    psi: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SpecJson", into = "SpecJson")]
pub struct LinearModelSpec {
    pub x: DMatrix<f64>,
    pub y: DVector<f64>,
    pub sigma2: f64,
    /// Prior precision.
    pub psi: DMatrix<f64>,
}

fn rows_to_matrix(rows: &[Vec<f64>], what: &'static str) -> Result<DMatrix<f64>, OracleError> {
    let ncols = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != ncols) {
        return Err(OracleError::DimensionMismatch(format!("ragged rows in {what}")));
    }
    Ok(DMatrix::from_fn(rows.len(), ncols, |i, j| rows[i][j]))
}

fn matrix_to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| m.row(i).iter().copied().collect())
        .collect()
}

impl TryFrom<SpecJson> for LinearModelSpec {
    type Error = OracleError;

    fn try_from(raw: SpecJson) -> Result<Self, OracleError> {
        let x = rows_to_matrix(&raw.x, "X")?;
        let p = x.ncols();
        let psi = match raw.psi {
            Some(rows) => rows_to_matrix(&rows, "Psi")?,
            None => DMatrix::zeros(p, p),
        };
        LinearModelSpec::new(x, DVector::from_vec(raw.y), raw.sigma2, psi)
    }
}

impl From<LinearModelSpec> for SpecJson {
    fn from(s: LinearModelSpec) -> Self {
        SpecJson {
            x: matrix_to_rows(&s.x),
            y: s.y.iter().copied().collect(),
            sigma2: s.sigma2,
            psi: Some(matrix_to_rows(&s.psi)),
        }
    }
}

impl LinearModelSpec {
    pub fn new(
        x: DMatrix<f64>,
        y: DVector<f64>,
        sigma2: f64,
        psi: DMatrix<f64>,
    ) -> Result<Self, OracleError> {
        let (n, p) = x.shape();
        if n == 0 || p == 0 {
            return Err(OracleError::DimensionMismatch("X is empty".into()));
        }
        if y.len() != n {
            return Err(OracleError::DimensionMismatch(format!(
                "y has {} entries, X has {n} rows",
                y.len()
            )));
        }
        if psi.shape() != (p, p) {
            return Err(OracleError::DimensionMismatch(format!(
                "Psi is {}x{}, expected {p}x{p}",
                psi.nrows(),
                psi.ncols()
            )));
        }
        if !x.iter().all(|v| v.is_finite()) {
            return Err(OracleError::NonFiniteInput("X"));
        }
        if !y.iter().all(|v| v.is_finite()) {
            return Err(OracleError::NonFiniteInput("y"));
        }
        if !psi.iter().all(|v| v.is_finite()) {
            return Err(OracleError::NonFiniteInput("Psi"));
        }
        if !(sigma2.is_finite() && sigma2 > 0.0) {
            return Err(OracleError::NonFiniteInput("sigma2"));
        }
        Ok(Self { x, y, sigma2, psi })
    }

    /// Flat-prior spec.
    pub fn flat(x: DMatrix<f64>, y: DVector<f64>, sigma2: f64) -> Result<Self, OracleError> {
        let p = x.ncols();
        Self::new(x, y, sigma2, DMatrix::zeros(p, p))
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }

    /// Same model with prior mean `m0` moved to the origin: `y - X m0`.
    ///
    /// Diagnostics and log-likelihood draws are unchanged by the shift.
    pub fn center_prior(&self, m0: &DVector<f64>) -> Result<Self, OracleError> {
        if m0.len() != self.p() {
            return Err(OracleError::DimensionMismatch("prior mean length".into()));
        }
        Self::new(
            self.x.clone(),
            &self.y - &self.x * m0,
            self.sigma2,
            self.psi.clone(),
        )
    }

    pub fn obs_ids(&self) -> Vec<String> {
        (1..=self.n()).map(|i| i.to_string()).collect()
    }

    fn precision_chol(&self) -> Result<Cholesky<f64, Dyn>, OracleError> {
        let a = &self.psi * self.sigma2 + self.x.tr_mul(&self.x);
        spd_chol(a).ok_or(OracleError::SingularSystem)
    }

    /// Posterior mean `A^{-1} X'y`.
    pub fn posterior_mean(&self) -> Result<DVector<f64>, OracleError> {
        Ok(self.precision_chol()?.solve(&self.x.tr_mul(&self.y)))
    }

    /// Posterior covariance `sigma2 A^{-1}`.
    pub fn posterior_cov(&self) -> Result<DMatrix<f64>, OracleError> {
        let c = self.precision_chol()?.inverse() * self.sigma2;
        Ok((&c + c.transpose()) * 0.5)
    }

    /// Log-likelihood of every observation at `theta`.
    pub fn loglik(&self, theta: &DVector<f64>) -> DVector<f64> {
        let c = -0.5 * (2.0 * std::f64::consts::PI * self.sigma2).ln();
        let fitted = &self.x * theta;
        DVector::from_fn(self.n(), |i, _| {
            c - (self.y[i] - fitted[i]).powi(2) / (2.0 * self.sigma2)
        })
    }
}

/// Cholesky factor of a symmetric matrix, refusing numerically singular ones.
fn spd_chol(a: DMatrix<f64>) -> Option<Cholesky<f64, Dyn>> {
    let a = (&a + a.transpose()) * 0.5;
    let scale = a.diagonal().amax();
    let chol = Cholesky::new(a)?;
    let l = chol.l_dirty();
    let min_pivot = (0..l.nrows()).map(|i| l[(i, i)] * l[(i, i)]).fold(f64::INFINITY, f64::min);
    (min_pivot > 1e-13 * scale).then_some(chol)
}

/// Closed-form diagnostics of a [`LinearModelSpec`].
#[derive(Debug, Clone)]
pub struct LinearDiagnostics {
    pub obs_ids: Vec<String>,
    pub sigma2: f64,
    pub hat: DMatrix<f64>,
    pub h: Vec<f64>,
    pub residuals: Vec<f64>,
    pub theta_bar: DVector<f64>,
    /// Maximum-likelihood estimate, when `X'X` is invertible.
    pub theta_hat: Option<DVector<f64>>,
    pub posterior_cov: DMatrix<f64>,
    pub linf: Vec<f64>,
    pub dinf: Vec<f64>,
    /// `+inf` where `h_ii >= 1`.
    pub zinf: Vec<f64>,
    pub cook: Vec<f64>,
    pub p_d: f64,
    pub p_w: f64,
    pub p_v: f64,
    /// `J Var(theta | y) J` with `J = X'X / sigma2`.
    pub sandwich: DMatrix<f64>,
}

pub fn linf_closed(r: f64, h: f64, sigma2: f64) -> f64 {
    r * r * h / sigma2 + h * h / 2.0
}

pub fn dinf_closed(r: f64, h: f64, sigma2: f64) -> f64 {
    r * r * h / (sigma2 * (1.0 + h)) + h - h.ln_1p()
}

pub fn zinf_closed(r: f64, h: f64, sigma2: f64) -> f64 {
    if h >= 1.0 {
        return f64::INFINITY;
    }
    r * r * h / (sigma2 * (1.0 - h)) - h - (-h).ln_1p()
}

pub fn cook_closed(r: f64, h: f64, sigma2: f64, k: f64) -> f64 {
    if h >= 1.0 {
        return f64::INFINITY;
    }
    r * r * h / (k * sigma2 * (1.0 - h).powi(2))
}

pub fn fit(spec: &LinearModelSpec) -> Result<LinearDiagnostics, OracleError> {
    let chol = spec.precision_chol()?;
    let a_inv = chol.inverse();
    let hat = &spec.x * &a_inv * spec.x.transpose();
    let hat = (&hat + hat.transpose()) * 0.5;
    let theta_bar = chol.solve(&spec.x.tr_mul(&spec.y));
    let resid = &spec.y - &hat * &spec.y;
    let xtx = spec.x.tr_mul(&spec.x);
    let theta_hat = spd_chol(xtx.clone()).map(|c| c.solve(&spec.x.tr_mul(&spec.y)));
    let s2 = spec.sigma2;
    let n = spec.n();
    let h: Vec<f64> = (0..n).map(|i| hat[(i, i)]).collect();
    let r: Vec<f64> = resid.iter().copied().collect();
    let k: f64 = h.iter().sum();
    let linf: Vec<f64> = (0..n).map(|i| linf_closed(r[i], h[i], s2)).collect();
    let dinf = (0..n).map(|i| dinf_closed(r[i], h[i], s2)).collect();
    let zinf = (0..n).map(|i| zinf_closed(r[i], h[i], s2)).collect();
    let cook = (0..n).map(|i| cook_closed(r[i], h[i], s2, k)).collect();
    let p_w = linf.iter().sum();
    let rhr = resid.dot(&(&hat * &resid));
    let tr_h2: f64 = hat.iter().map(|v| v * v).sum();
    let p_v = 2.0 * (rhr / s2 + tr_h2 / 2.0);
    let posterior_cov = &a_inv * s2;
    let j = &xtx / s2;
    let sandwich = &j * &posterior_cov * &j;
    Ok(LinearDiagnostics {
        obs_ids: spec.obs_ids(),
        sigma2: s2,
        hat,
        h,
        residuals: r,
        theta_bar,
        theta_hat,
        posterior_cov,
        linf,
        dinf,
        zinf,
        cook,
        p_d: k,
        p_w,
        p_v,
        sandwich,
    })
}

impl LinearDiagnostics {
    pub fn n(&self) -> usize {
        self.h.len()
    }

    /// Exact `V_ij = r_i r_j H_ij / sigma2 + H_ij^2 / 2`.
    pub fn v_matrix(&self) -> CovMatrix {
        let n = self.n();
        let r = &self.residuals;
        let m = DMatrix::from_fn(n, n, |i, j| {
            let hij = self.hat[(i, j)];
            r[i] * r[j] * hij / self.sigma2 + hij * hij / 2.0
        });
        CovMatrix::new(m, self.obs_ids.clone()).expect("square by construction")
    }

    pub fn to_json(&self) -> serde_json::Value {
        // JSON has no infinity; unbounded ZINF and Cook become null
        let finite = |v: &[f64]| -> Vec<Option<f64>> {
            v.iter().map(|x| x.is_finite().then_some(*x)).collect()
        };
        json!({
            "obs_ids": self.obs_ids,
            "sigma2": self.sigma2,
            "h": self.h,
            "residuals": self.residuals,
            "linf": self.linf,
            "dinf": self.dinf,
            "zinf": finite(&self.zinf),
            "cook": finite(&self.cook),
            "p_d": self.p_d,
            "p_w": self.p_w,
            "p_v": self.p_v,
            "theta_bar": self.theta_bar.iter().collect::<Vec<_>>(),
            "theta_hat": self.theta_hat.as_ref().map(|t| t.iter().collect::<Vec<_>>()),
            "hat": matrix_to_rows(&self.hat),
            "sandwich": matrix_to_rows(&self.sandwich),
        })
    }

    pub fn write_csv<W: Write>(&self, w: W) -> std::io::Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["obs_id", "h", "residual", "linf", "dinf", "zinf", "cook"])?;
        for i in 0..self.n() {
            wtr.write_record([
                self.obs_ids[i].clone(),
                fmt_num(self.h[i]),
                fmt_num(self.residuals[i]),
                fmt_num(self.linf[i]),
                fmt_num(self.dinf[i]),
                fmt_num(self.zinf[i]),
                fmt_num(self.cook[i]),
            ])?;
        }
        wtr.flush()
    }
}

/// Both sides of `2 r'Hr / sigma2 = 2 (theta_hat - theta_bar)' S (theta_hat - theta_bar)`.
pub fn sandwich_identity_check(spec: &LinearModelSpec) -> Result<(f64, f64), OracleError> {
    let d = fit(spec)?;
    let theta_hat = d.theta_hat.as_ref().ok_or(OracleError::SingularSystem)?;
    let r = DVector::from_vec(d.residuals.clone());
    let lhs = 2.0 * r.dot(&(&d.hat * &r)) / spec.sigma2;
    let delta = theta_hat - &d.theta_bar;
    let rhs = 2.0 * delta.dot(&(&d.sandwich * &delta));
    Ok((lhs, rhs))
}

/// Draws from the exact posterior.
#[derive(Debug, Clone)]
pub struct ExactDraws {
    pub loglik: LogLikSamples,
    pub pred: PredictiveDraws,
    /// One row per draw.
    pub theta: DMatrix<f64>,
}

/// Number of draws each chain receives when `draws` are spread over `chains`.
pub fn chain_lengths(draws: usize, chains: usize) -> Vec<usize> {
    (0..chains)
        .map(|c| draws / chains + usize::from(c < draws % chains))
        .collect()
}

/// Samples `theta ~ N(theta_bar, sigma2 A^{-1})` independently.
///
/// Chain `c` uses its own ChaCha8 stream of `seed`, so output depends only on
/// `(seed, draws, chains)`. Chains are labelled `0..chains`.
pub fn exact_sampler(
    spec: &LinearModelSpec,
    draws: usize,
    chains: usize,
    seed: u64,
) -> Result<ExactDraws, OracleError> {
    if chains == 0 {
        return Err(OracleError::InvalidSampler("need at least one chain".into()));
    }
    if draws < 2 * chains {
        return Err(OracleError::InvalidSampler(format!(
            "{draws} draws cannot give {chains} chains two draws each"
        )));
    }
    let mean = spec.posterior_mean()?;
    let cov = spec.posterior_cov()?;
    let lower = Cholesky::new(cov).ok_or(OracleError::SingularSystem)?.l();
    let p = spec.p();
    let n = spec.n();
    let lengths = chain_lengths(draws, chains);

    let blocks: Vec<Vec<DVector<f64>>> = lengths
        .par_iter()
        .enumerate()
        .map(|(c, &len)| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(c as u64);
            (0..len)
                .map(|_| {
                    let z = DVector::from_fn(p, |_, _| rng.sample::<f64, _>(StandardNormal));
                    &mean + &lower * z
                })
                .collect()
        })
        .collect();
    let thetas: Vec<DVector<f64>> = blocks.into_iter().flatten().collect();
    let draw_chain: Vec<u32> = lengths
        .iter()
        .enumerate()
        .flat_map(|(c, &len)| std::iter::repeat(c as u32).take(len))
        .collect();

    let theta = DMatrix::from_fn(draws, p, |s, j| thetas[s][j]);
    let fitted = &theta * spec.x.transpose(); // draws x n
    let c0 = -0.5 * (2.0 * std::f64::consts::PI * spec.sigma2).ln();
    let mut columns = vec![vec![0.0; draws]; n];
    columns.par_iter_mut().enumerate().for_each(|(i, col)| {
        for (s, v) in col.iter_mut().enumerate() {
            *v = c0 - (spec.y[i] - fitted[(s, i)]).powi(2) / (2.0 * spec.sigma2);
        }
    });
    let ids = spec.obs_ids();
    let loglik = LogLikSamples::from_columns(columns, draw_chain.clone(), ids.clone())?;
    let mut params = Vec::with_capacity(draws * n);
    for s in 0..draws {
        for i in 0..n {
            params.push(Predictive::NormalKnownVar {
                mean: fitted[(s, i)],
                var: spec.sigma2,
            });
        }
    }
    let pred = PredictiveDraws::new(params, draw_chain, ids)?;
    Ok(ExactDraws {
        loglik,
        pred,
        theta,
    })
}

/// Plants one response outlier and one high-leverage point.
///
/// The outlier's response is set `outlier_scale * sigma` away from its
/// fitted value, on the side of its current residual. The leverage row is
/// moved `leverage_shift` standard deviations along the first nonconstant
/// column of `X`, and its response is set to the prediction from the other
/// rows so that it lies on the fitted line.
pub fn plant_anomalies(
    spec: &LinearModelSpec,
    outlier_idx: usize,
    outlier_scale: f64,
    leverage_idx: usize,
    leverage_shift: f64,
) -> Result<LinearModelSpec, OracleError> {
    let n = spec.n();
    for index in [outlier_idx, leverage_idx] {
        if index >= n {
            return Err(OracleError::IndexOutOfRange { index, n });
        }
    }
    if outlier_idx == leverage_idx {
        return Err(OracleError::InvalidAnomaly(
            "outlier and leverage point must differ".into(),
        ));
    }
    if !(outlier_scale > 1.0 && outlier_scale.is_finite()) {
        return Err(OracleError::InvalidAnomaly(format!(
            "outlier scale {outlier_scale} must exceed 1"
        )));
    }
    if !(leverage_shift != 0.0 && leverage_shift.is_finite()) {
        return Err(OracleError::InvalidAnomaly("leverage shift must be nonzero".into()));
    }
    let col = (0..spec.p())
        .find(|&j| {
            let c = spec.x.column(j);
            c.iter().any(|v| *v != c[0])
        })
        .ok_or_else(|| OracleError::InvalidAnomaly("X has no nonconstant column".into()))?;

    let base = fit(spec)?;
    let mut y = spec.y.clone();
    let fitted = spec.y[outlier_idx] - base.residuals[outlier_idx];
    let side = if base.residuals[outlier_idx] < 0.0 { -1.0 } else { 1.0 };
    y[outlier_idx] = fitted + side * outlier_scale * spec.sigma2.sqrt();

    let mut x = spec.x.clone();
    let c = spec.x.column(col);
    let mean = c.mean();
    let sd = (c.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt();
    x[(leverage_idx, col)] = mean + leverage_shift * sd;

    let keep: Vec<usize> = (0..n).filter(|&i| i != leverage_idx).collect();
    let rest = LinearModelSpec::new(
        x.select_rows(&keep),
        y.select_rows(&keep),
        spec.sigma2,
        spec.psi.clone(),
    )?;
    let theta = rest.posterior_mean()?;
    y[leverage_idx] = x.row(leverage_idx).transpose().dot(&theta);
    LinearModelSpec::new(x, y, spec.sigma2, spec.psi.clone())
}

/// Condition number `sqrt(lambda_max / lambda_min)` of `X'X`.
pub fn condition_number(x: &DMatrix<f64>) -> f64 {
    let e = jacobi_eigen(&x.tr_mul(x));
    let max = e.values[0];
    let min = *e.values.last().expect("nonempty");
    if min <= 0.0 {
        f64::INFINITY
    } else {
        (max / min).sqrt()
    }
}

/// Random spec with the given shape: standard normal design and
/// coefficients, `sigma2` in `[0.5, 2]`, and either a flat prior or a
/// diagonal log-normal prior precision.
pub fn random_spec<R: Rng + ?Sized>(
    rng: &mut R,
    n: usize,
    p: usize,
    informative: bool,
) -> LinearModelSpec {
    loop {
        let x = DMatrix::from_fn(n, p, |_, _| rng.sample::<f64, _>(StandardNormal));
        if condition_number(&x) > MAX_CONDITION {
            continue;
        }
        let sigma2: f64 = rng.random_range(0.5..=2.0);
        let psi = if informative {
            DMatrix::from_diagonal(&DVector::from_fn(p, |_, _| {
                rng.sample::<f64, _>(StandardNormal).exp()
            }))
        } else {
            DMatrix::zeros(p, p)
        };
        let theta = DVector::from_fn(p, |_, _| rng.sample::<f64, _>(StandardNormal));
        let noise = DVector::from_fn(n, |_, _| {
            sigma2.sqrt() * rng.sample::<f64, _>(StandardNormal)
        });
        let y = &x * theta + noise;
        if let Ok(spec) = LinearModelSpec::new(x, y, sigma2, psi) {
            return spec;
        }
    }
}

/// Random spec with `n` in `[5, 50]`, `p` in `[1, 5]` and a flat prior half
/// the time.
pub fn random_spec_any<R: Rng + ?Sized>(rng: &mut R) -> LinearModelSpec {
    let n = rng.random_range(5..=50);
    let p = rng.random_range(1..=5);
    let informative = rng.random_bool(0.5);
    random_spec(rng, n, p, informative)
}

/// Plug-in DIC penalty: mean deviance minus deviance at the mean draw.
pub fn dic_plug_in_pd(spec: &LinearModelSpec, theta_draws: &DMatrix<f64>) -> f64 {
    let deviance = |t: &DVector<f64>| -2.0 * spec.loglik(t).sum();
    let s = theta_draws.nrows();
    let mean_dev = (0..s)
        .map(|k| deviance(&theta_draws.row(k).transpose()))
        .sum::<f64>()
        / s as f64;
    let centre = DVector::from_fn(theta_draws.ncols(), |j, _| theta_draws.column(j).mean());
    mean_dev - deviance(&centre)
}
