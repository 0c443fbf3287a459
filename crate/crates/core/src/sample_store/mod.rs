//! Posterior-draw data model.
//!
//! A [`LogLikSamples`] holds the per-draw, per-observation log-likelihood
//! contributions `log p(y_i | theta^(s))` produced by any sampler, together
//! with chain labels and observation ids. [`PredictiveDraws`] holds the
//! matching predictive-distribution parameters used for hat values, and
//! [`GroupMap`] partitions observations for aggregated diagnostics.
//!
//! Every type validates on construction and is immutable afterwards.

mod groups;
mod io;
mod predictive;

pub use groups::{aggregate, GroupMap};
pub use io::{
    load_groups, load_metadata, load_predictive, load_samples, read_loglik_csv,
    read_predictive_csv, write_groups_csv, write_loglik_csv, write_metadata,
    write_predictive_csv, FamilySpec, Metadata,
};
pub use predictive::{Family, Predictive, PredictiveDraws};
pub(crate) use io::fmt_num;

use std::collections::{BTreeMap, HashSet};
use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum SampleError {
    #[error("need at least 2 draws, found {0}")]
    TooFewDraws(usize),
    #[error("need at least one observation")]
    NoObservations,
    #[error("malformed CSV at line {line}: {reason}")]
    MalformedCsv { line: u64, reason: String },
    #[error("missing value at draw {row}, observation {obs_id}")]
    MissingValue { row: usize, obs_id: String },
    #[error("non-finite value at draw {row}, observation {obs_id}")]
    NonFiniteValue { row: usize, obs_id: String },
    #[error("duplicate observation id {0:?}")]
    DuplicateObsId(String),
    #[error("chain labels cover {labels} draws but the data has {draws}")]
    ChainMismatch { labels: usize, draws: usize },
    #[error("chain {chain} has {draws} draw(s); each chain needs at least 2")]
    ChainTooShort { chain: u32, draws: usize },
    #[error("group map references unknown observation {0:?}")]
    UnknownObsId(String),
    #[error("observation {0:?} is not assigned to any group")]
    UncoveredObsId(String),
    #[error("group map is empty")]
    EmptyGroupMap,
    #[error("invalid {param} = {value} at draw {row}, observation {obs_id}")]
    InvalidParameter {
        row: usize,
        obs_id: String,
        param: &'static str,
        value: f64,
    },
    #[error("observation {obs_id}: {reason}")]
    FamilyMismatch { obs_id: String, reason: String },
    #[error("predictive draws do not line up with the log-likelihood samples: {0}")]
    ShapeMismatch(String),
    #[error("metadata: {0}")]
    Metadata(String),
    #[error("cannot read metadata {path}: {source}")]
    MissingMetadata {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

impl SampleError {
    /// Stable machine-readable name of the error variant.
    pub fn code(&self) -> &'static str {
        match self {
            Self::TooFewDraws(_) => "TooFewDraws",
            Self::NoObservations => "NoObservations",
            Self::MalformedCsv { .. } => "MalformedCsv",
            Self::MissingValue { .. } => "MissingValue",
            Self::NonFiniteValue { .. } => "NonFiniteValue",
            Self::DuplicateObsId(_) => "DuplicateObsId",
            Self::ChainMismatch { .. } => "ChainMismatch",
            Self::ChainTooShort { .. } => "ChainTooShort",
            Self::UnknownObsId(_) => "UnknownObsId",
            Self::UncoveredObsId(_) => "UncoveredObsId",
            Self::EmptyGroupMap => "EmptyGroupMap",
            Self::InvalidParameter { .. } => "InvalidParameter",
            Self::FamilyMismatch { .. } => "FamilyMismatch",
            Self::ShapeMismatch(_) => "ShapeMismatch",
            Self::Metadata(_) => "Metadata",
            Self::MissingMetadata { .. } => "MissingMetadata",
            Self::Io { .. } => "Io",
        }
    }
}

/// S x n matrix of log-likelihood contributions.
///
/// Stored column-major: every diagnostic walks one observation's draws at a
/// time.
#[derive(Debug, Clone, PartialEq)]
pub struct LogLikSamples {
    values: Vec<f64>,
    n_draws: usize,
    draw_chain: Vec<u32>,
    obs_ids: Vec<String>,
}

impl LogLikSamples {
    /// Builds from one `Vec` per draw (row-major input).
    pub fn from_rows(
        rows: Vec<Vec<f64>>,
        draw_chain: Vec<u32>,
        obs_ids: Vec<String>,
    ) -> Result<Self, SampleError> {
        let n = obs_ids.len();
        let s = rows.len();
        let mut values = vec![0.0; n * s];
        for (r, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(SampleError::MalformedCsv {
                    line: r as u64 + 2,
                    reason: format!("expected {n} values, found {}", row.len()),
                });
            }
            for (i, &v) in row.iter().enumerate() {
                values[i * s + r] = v;
            }
        }
        Self::from_column_major(values, s, draw_chain, obs_ids)
    }

    /// Builds from one `Vec` per observation.
    pub fn from_columns(
        columns: Vec<Vec<f64>>,
        draw_chain: Vec<u32>,
        obs_ids: Vec<String>,
    ) -> Result<Self, SampleError> {
        if columns.len() != obs_ids.len() {
            return Err(SampleError::ShapeMismatch(format!(
                "{} columns for {} observation ids",
                columns.len(),
                obs_ids.len()
            )));
        }
        let s = draw_chain.len();
        let mut values = Vec::with_capacity(s * columns.len());
        for c in columns {
            if c.len() != s {
                return Err(SampleError::ChainMismatch {
                    labels: s,
                    draws: c.len(),
                });
            }
            values.extend(c);
        }
        Self::from_column_major(values, s, draw_chain, obs_ids)
    }

    fn from_column_major(
        values: Vec<f64>,
        n_draws: usize,
        draw_chain: Vec<u32>,
        obs_ids: Vec<String>,
    ) -> Result<Self, SampleError> {
        if obs_ids.is_empty() {
            return Err(SampleError::NoObservations);
        }
        if n_draws < 2 {
            return Err(SampleError::TooFewDraws(n_draws));
        }
        if draw_chain.len() != n_draws {
            return Err(SampleError::ChainMismatch {
                labels: draw_chain.len(),
                draws: n_draws,
            });
        }
        check_unique(&obs_ids)?;
        check_chains(&draw_chain)?;
        for (i, id) in obs_ids.iter().enumerate() {
            let col = &values[i * n_draws..(i + 1) * n_draws];
            if let Some(r) = col.iter().position(|v| !v.is_finite()) {
                return Err(SampleError::NonFiniteValue {
                    row: r + 1,
                    obs_id: id.clone(),
                });
            }
        }
        Ok(Self {
            values,
            n_draws,
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

    /// All draws for observation `i`.
    pub fn column(&self, i: usize) -> &[f64] {
        &self.values[i * self.n_draws..(i + 1) * self.n_draws]
    }

    pub fn get(&self, draw: usize, obs: usize) -> f64 {
        self.values[obs * self.n_draws + draw]
    }

    pub fn columns(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks_exact(self.n_draws)
    }

    /// Per-draw total log-likelihood, summed in column order.
    pub fn row_sums(&self) -> Vec<f64> {
        let mut sums = vec![0.0; self.n_draws];
        for col in self.columns() {
            for (acc, v) in sums.iter_mut().zip(col) {
                *acc += v;
            }
        }
        sums
    }

    pub fn row(&self, draw: usize) -> Vec<f64> {
        (0..self.n_obs()).map(|i| self.get(draw, i)).collect()
    }

    /// Draw indices grouped for Monte Carlo standard errors.
    ///
    /// One block per chain (ascending label). A single chain is split into
    /// first and second halves.
    pub fn replicate_blocks(&self) -> Vec<Vec<usize>> {
        replicate_blocks(&self.draw_chain)
    }

    /// Returns a copy with the observation columns reordered by `perm`
    /// (`perm[k]` is the source column of output column `k`).
    pub fn permute_columns(&self, perm: &[usize]) -> Result<Self, SampleError> {
        let columns = perm.iter().map(|&i| self.column(i).to_vec()).collect();
        let ids = perm.iter().map(|&i| self.obs_ids[i].clone()).collect();
        Self::from_columns(columns, self.draw_chain.clone(), ids)
    }
}

pub(crate) fn check_unique(ids: &[String]) -> Result<(), SampleError> {
    let mut seen = HashSet::with_capacity(ids.len());
    for id in ids {
        if !seen.insert(id.as_str()) {
            return Err(SampleError::DuplicateObsId(id.clone()));
        }
    }
    Ok(())
}

pub(crate) fn check_chains(draw_chain: &[u32]) -> Result<(), SampleError> {
    let mut counts: BTreeMap<u32, usize> = BTreeMap::new();
    for &c in draw_chain {
        *counts.entry(c).or_default() += 1;
    }
    for (&chain, &draws) in &counts {
        if draws < 2 {
            return Err(SampleError::ChainTooShort { chain, draws });
        }
    }
    Ok(())
}

pub(crate) fn replicate_blocks(draw_chain: &[u32]) -> Vec<Vec<usize>> {
    let mut by_chain: BTreeMap<u32, Vec<usize>> = BTreeMap::new();
    for (s, &c) in draw_chain.iter().enumerate() {
        by_chain.entry(c).or_default().push(s);
    }
    if by_chain.len() == 1 {
        let all: Vec<usize> = (0..draw_chain.len()).collect();
        let half = all.len() / 2;
        return vec![all[..half].to_vec(), all[half..].to_vec()];
    }
    by_chain.into_values().collect()
}
