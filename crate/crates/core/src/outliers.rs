//! Outlier matrix `Omega = (tr H / tr V) H^{-1/2} V H^{-1/2}` and its
//! eigensystem.
//!
//! `CLOUT_i = Omega_ii` compares how much an observation moves the posterior
//! with how much it could move it given its leverage. High influence at low
//! leverage marks an outlier; high influence explained by high leverage
//! does not.

use std::io::Write;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;
use thiserror::Error;

use crate::eigen::jacobi_eigen;
use crate::influence::{CovMatrix, Perturbation};
use crate::leverage::HatValues;
use crate::sample_store::fmt_num;

/// Hat-values below this fraction of the largest are refused.
pub const ZERO_HAT_RELATIVE: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum OutlierError {
    #[error(
        "hat-value is numerically zero for {}; group these observations with others or exclude them",
        .0.join(", ")
    )]
    ZeroHatValue(Vec<String>),
    #[error("trace of V is zero")]
    ZeroTrace,
    #[error("perturbation direction is all zeros")]
    ZeroPerturbation,
    #[error("truncation rank {m} outside 1..={n}")]
    RankOutOfRange { m: usize, n: usize },
    #[error("V and hat-values disagree: {0}")]
    Mismatch(String),
}

impl OutlierError {
    pub fn code(&self) -> &'static str {
        match self {
            Self::ZeroHatValue(_) => "ZeroHatValue",
            Self::ZeroTrace => "ZeroTrace",
            Self::ZeroPerturbation => "ZeroPerturbation",
            Self::RankOutOfRange { .. } => "RankOutOfRange",
            Self::Mismatch(_) => "Mismatch",
        }
    }
}

#[derive(Debug, Clone)]
pub struct OutlierDecomposition {
    pub obs_ids: Vec<String>,
    pub omega: DMatrix<f64>,
    /// Descending.
    pub eigenvalues: Vec<f64>,
    /// Column `j` is the eigenvector of `eigenvalues[j]`.
    pub eigenvectors: DMatrix<f64>,
    pub clout: Vec<f64>,
}

pub fn outlier_matrix(v: &CovMatrix, h: &HatValues) -> Result<OutlierDecomposition, OutlierError> {
    if v.obs_ids() != h.obs_ids.as_slice() {
        return Err(OutlierError::Mismatch("observation ids differ".into()));
    }
    let tr = v.trace();
    if !(tr > 0.0) {
        return Err(OutlierError::ZeroTrace);
    }
    let hmax = h.h.iter().copied().fold(0.0, f64::max);
    let bad: Vec<String> = h
        .h
        .iter()
        .zip(&h.obs_ids)
        .filter(|(hi, _)| !(**hi > ZERO_HAT_RELATIVE * hmax) || hmax <= 0.0)
        .map(|(_, id)| id.clone())
        .collect();
    if !bad.is_empty() {
        return Err(OutlierError::ZeroHatValue(bad));
    }
    let total: f64 = h.h.iter().sum();
    let k = total / tr;
    let vm = v.matrix();
    let n = v.n();
    let omega = DMatrix::from_fn(n, n, |i, j| k * vm[(i, j)] / (h.h[i] * h.h[j]).sqrt());
    let clout = (0..n).map(|i| omega[(i, i)]).collect();
    let eig = jacobi_eigen(&omega);
    Ok(OutlierDecomposition {
        obs_ids: v.obs_ids().to_vec(),
        omega,
        eigenvalues: eig.values,
        eigenvectors: eig.vectors,
        clout,
    })
}

/// Rayleigh quotient `eps' Omega eps / eps'eps`.
pub fn clout_direction(dec: &OutlierDecomposition, eps: &Perturbation) -> Result<f64, OutlierError> {
    if eps.len() != dec.n() {
        return Err(OutlierError::Mismatch(format!(
            "perturbation has {} entries for {} observations",
            eps.len(),
            dec.n()
        )));
    }
    let norm = eps.norm_sq();
    if norm == 0.0 {
        return Err(OutlierError::ZeroPerturbation);
    }
    let e = DVector::from_column_slice(eps.as_slice());
    Ok(e.dot(&(&dec.omega * &e)) / norm)
}

/// `sum_{j <= m} lambda_j (eps^j_i)^2` for each observation.
pub fn truncated_clout(dec: &OutlierDecomposition, m: usize) -> Result<Vec<f64>, OutlierError> {
    let n = dec.n();
    if m == 0 || m > n {
        return Err(OutlierError::RankOutOfRange { m, n });
    }
    Ok((0..n)
        .map(|i| {
            (0..m)
                .map(|j| dec.eigenvalues[j] * dec.eigenvectors[(i, j)].powi(2))
                .sum()
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScreeRow {
    pub rank: usize,
    pub eigenvalue: f64,
    pub cumulative_share: f64,
}

pub fn scree(dec: &OutlierDecomposition) -> Vec<ScreeRow> {
    let total: f64 = dec.eigenvalues.iter().sum();
    let mut acc = 0.0;
    dec.eigenvalues
        .iter()
        .enumerate()
        .map(|(j, &l)| {
            acc += l;
            ScreeRow {
                rank: j + 1,
                eigenvalue: l,
                cumulative_share: acc / total,
            }
        })
        .collect()
}

#[derive(Serialize)]
struct DecompositionJson<'a> {
    obs_ids: &'a [String],
    eigenvalues: &'a [f64],
    /// `loadings[j]` is eigenvector `j`.
    loadings: Vec<Vec<f64>>,
    clout: &'a [f64],
    omega: Vec<Vec<f64>>,
}

impl OutlierDecomposition {
    pub fn n(&self) -> usize {
        self.obs_ids.len()
    }

    pub fn eigenvector(&self, j: usize) -> Vec<f64> {
        self.eigenvectors.column(j).iter().copied().collect()
    }

    pub fn to_json(&self) -> serde_json::Value {
        let n = self.n();
        let doc = DecompositionJson {
            obs_ids: &self.obs_ids,
            eigenvalues: &self.eigenvalues,
            loadings: (0..n).map(|j| self.eigenvector(j)).collect(),
            clout: &self.clout,
            omega: (0..n)
                .map(|i| self.omega.row(i).iter().copied().collect())
                .collect(),
        };
        serde_json::to_value(doc).expect("plain numbers serialize")
    }

    /// Per-observation CLOUT, with a truncated column when `m` is given.
    pub fn write_clout_csv<W: Write>(&self, w: W, m: Option<usize>) -> Result<(), std::io::Error> {
        let trunc = match m {
            Some(m) => Some(
                truncated_clout(self, m)
                    .map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidInput, e))?,
            ),
            None => None,
        };
        let mut wtr = csv::Writer::from_writer(w);
        let mut header = vec!["obs_id".to_string(), "clout".to_string()];
        if let Some(m) = m {
            header.push(format!("clout_trunc_{m}"));
        }
        wtr.write_record(&header)?;
        for i in 0..self.n() {
            let mut rec = vec![self.obs_ids[i].clone(), fmt_num(self.clout[i])];
            if let Some(t) = &trunc {
                rec.push(fmt_num(t[i]));
            }
            wtr.write_record(&rec)?;
        }
        wtr.flush()
    }

    pub fn write_scree_csv<W: Write>(&self, w: W) -> std::io::Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["rank", "eigenvalue", "cumulative_share"])?;
        for r in scree(self) {
            wtr.write_record([
                r.rank.to_string(),
                fmt_num(r.eigenvalue),
                fmt_num(r.cumulative_share),
            ])?;
        }
        wtr.flush()
    }
}
