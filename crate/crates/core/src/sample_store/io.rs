//! Text interchange formats.
//!
//! * log-likelihood CSV: header row of observation ids, then one row per draw.
//! * metadata JSON: `{"chains": [...], "families": ..., "trials": [...]}`.
//! * predictive CSV: columns `<obs_id>.<param>`, rows aligned with the
//!   log-likelihood CSV.
//! * group CSV: header `obs_id,group`, one row per observation.
//!
//! Numbers are emitted with 17 significant digits so every file reloads to
//! the same bits.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufReader, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Family, GroupMap, LogLikSamples, PredictiveDraws, SampleError};

/// Sidecar metadata for a draw file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metadata {
    pub chains: Vec<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub families: Option<FamilySpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trials: Option<Vec<u32>>,
}

/// One family for every observation, or one per observation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum FamilySpec {
    Shared(Family),
    PerObservation(Vec<Family>),
}

impl FamilySpec {
    pub fn resolve(&self, n_obs: usize) -> Result<Vec<Family>, SampleError> {
        match self {
            FamilySpec::Shared(f) => Ok(vec![*f; n_obs]),
            FamilySpec::PerObservation(v) if v.len() == n_obs => Ok(v.clone()),
            FamilySpec::PerObservation(v) => Err(SampleError::Metadata(format!(
                "{} family tags for {n_obs} observations",
                v.len()
            ))),
        }
    }
}

impl Metadata {
    pub fn chains_only(chains: Vec<u32>) -> Self {
        Self {
            chains,
            families: None,
            trials: None,
        }
    }
}

pub(crate) fn fmt_num(x: f64) -> String {
    format!("{x:.16e}")
}

fn open(path: &Path) -> Result<BufReader<File>, SampleError> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|source| SampleError::Io {
            path: path.to_path_buf(),
            source,
        })
}

pub fn load_metadata(path: impl AsRef<Path>) -> Result<Metadata, SampleError> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|source| SampleError::MissingMetadata {
        path: path.to_path_buf(),
        source,
    })?;
    serde_json::from_reader(BufReader::new(file))
        .map_err(|e| SampleError::Metadata(format!("{}: {e}", path.display())))
}

pub fn write_metadata<W: Write>(meta: &Metadata, mut w: W) -> std::io::Result<()> {
    serde_json::to_writer_pretty(&mut w, meta)?;
    writeln!(w)
}

fn csv_reader<R: Read>(r: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(r)
}

fn malformed(e: &csv::Error) -> SampleError {
    let line = e.position().map(|p| p.line()).unwrap_or(0);
    let reason = match e.kind() {
        csv::ErrorKind::UnequalLengths {
            expected_len, len, ..
        } => format!("ragged row: expected {expected_len} fields, found {len}"),
        _ => e.to_string(),
    };
    SampleError::MalformedCsv { line, reason }
}

fn parse_cell(field: &str, row: usize, line: u64, column: &str) -> Result<f64, SampleError> {
    if field.is_empty() {
        return Err(SampleError::MissingValue {
            row,
            obs_id: column.to_string(),
        });
    }
    let v: f64 = field.parse().map_err(|_| SampleError::MalformedCsv {
        line,
        reason: format!("non-numeric cell {field:?} in column {column}"),
    })?;
    if !v.is_finite() {
        return Err(SampleError::NonFiniteValue {
            row,
            obs_id: column.to_string(),
        });
    }
    Ok(v)
}

/// Reads a numeric table: header names plus row-major values.
fn read_table<R: Read>(r: R) -> Result<(Vec<String>, Vec<Vec<f64>>), SampleError> {
    let mut rdr = csv_reader(r);
    let header: Vec<String> = rdr
        .headers()
        .map_err(|e| malformed(&e))?
        .iter()
        .map(str::to_string)
        .collect();
    if header.iter().all(|h| h.is_empty()) {
        return Err(SampleError::NoObservations);
    }
    let mut rows = Vec::new();
    for (k, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| malformed(&e))?;
        let line = rec.position().map(|p| p.line()).unwrap_or(k as u64 + 2);
        let row = rec
            .iter()
            .zip(&header)
            .map(|(f, col)| parse_cell(f, k + 1, line, col))
            .collect::<Result<Vec<_>, _>>()?;
        rows.push(row);
    }
    Ok((header, rows))
}

/// Parses a log-likelihood CSV given the per-draw chain labels.
pub fn read_loglik_csv<R: Read>(r: R, chains: Vec<u32>) -> Result<LogLikSamples, SampleError> {
    let (obs_ids, rows) = read_table(r)?;
    if chains.len() != rows.len() {
        return Err(SampleError::ChainMismatch {
            labels: chains.len(),
            draws: rows.len(),
        });
    }
    LogLikSamples::from_rows(rows, chains, obs_ids)
}

/// Loads a log-likelihood CSV and its metadata JSON.
pub fn load_samples(
    loglik_file: impl AsRef<Path>,
    metadata_file: impl AsRef<Path>,
) -> Result<LogLikSamples, SampleError> {
    let meta = load_metadata(metadata_file)?;
    read_loglik_csv(open(loglik_file.as_ref())?, meta.chains)
}

pub fn write_loglik_csv<W: Write>(samples: &LogLikSamples, w: W) -> std::io::Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(samples.obs_ids())?;
    for s in 0..samples.n_draws() {
        wtr.write_record((0..samples.n_obs()).map(|i| fmt_num(samples.get(s, i))))?;
    }
    wtr.flush()
}

/// Parses a predictive-draw CSV. `meta` supplies chains, families and trials.
pub fn read_predictive_csv<R: Read>(r: R, meta: &Metadata) -> Result<PredictiveDraws, SampleError> {
    let (header, rows) = read_table(r)?;
    let mut obs_ids: Vec<String> = Vec::new();
    let mut column_of: HashMap<(String, String), usize> = HashMap::new();
    for (c, name) in header.iter().enumerate() {
        let (obs, param) = name.rsplit_once('.').ok_or_else(|| SampleError::MalformedCsv {
            line: 1,
            reason: format!("column {name:?} is not of the form <obs_id>.<param>"),
        })?;
        if !obs_ids.iter().any(|o| o == obs) {
            obs_ids.push(obs.to_string());
        }
        if column_of
            .insert((obs.to_string(), param.to_string()), c)
            .is_some()
        {
            return Err(SampleError::MalformedCsv {
                line: 1,
                reason: format!("duplicate column {name:?}"),
            });
        }
    }
    let n = obs_ids.len();
    let families = meta
        .families
        .as_ref()
        .ok_or_else(|| SampleError::Metadata("predictive draws need `families`".into()))?
        .resolve(n)?;
    let trials = match &meta.trials {
        Some(t) if t.len() == n => t.clone(),
        Some(t) => {
            return Err(SampleError::Metadata(format!(
                "{} trial counts for {n} observations",
                t.len()
            )))
        }
        None if families.contains(&Family::Binomial) => {
            return Err(SampleError::Metadata(
                "binomial observations need `trials`".into(),
            ))
        }
        None => vec![1; n],
    };
    let mut layout = Vec::with_capacity(n);
    let mut expected_columns = 0;
    for (i, obs) in obs_ids.iter().enumerate() {
        let cols = families[i]
            .param_names()
            .iter()
            .map(|p| {
                column_of
                    .get(&(obs.clone(), p.to_string()))
                    .copied()
                    .ok_or_else(|| SampleError::MalformedCsv {
                        line: 1,
                        reason: format!("missing column {obs}.{p}"),
                    })
            })
            .collect::<Result<Vec<_>, _>>()?;
        expected_columns += cols.len();
        layout.push(cols);
    }
    if expected_columns != header.len() {
        return Err(SampleError::MalformedCsv {
            line: 1,
            reason: "unexpected extra parameter columns".into(),
        });
    }
    if meta.chains.len() != rows.len() {
        return Err(SampleError::ChainMismatch {
            labels: meta.chains.len(),
            draws: rows.len(),
        });
    }
    let mut draws = Vec::with_capacity(rows.len() * n);
    for row in &rows {
        for (i, cols) in layout.iter().enumerate() {
            let params: Vec<f64> = cols.iter().map(|&c| row[c]).collect();
            draws.push(families[i].with_params(&params, trials[i]));
        }
    }
    PredictiveDraws::new(draws, meta.chains.clone(), obs_ids)
}

pub fn load_predictive(
    pred_file: impl AsRef<Path>,
    metadata_file: impl AsRef<Path>,
) -> Result<PredictiveDraws, SampleError> {
    let meta = load_metadata(metadata_file)?;
    read_predictive_csv(open(pred_file.as_ref())?, &meta)
}

pub fn write_predictive_csv<W: Write>(pred: &PredictiveDraws, w: W) -> std::io::Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    let mut header = Vec::new();
    for (i, id) in pred.obs_ids().iter().enumerate() {
        for p in pred.family(i).param_names() {
            header.push(format!("{id}.{p}"));
        }
    }
    wtr.write_record(&header)?;
    for s in 0..pred.n_draws() {
        let mut rec = Vec::with_capacity(header.len());
        for i in 0..pred.n_obs() {
            rec.extend(pred.get(s, i).params().into_iter().map(fmt_num));
        }
        wtr.write_record(&rec)?;
    }
    wtr.flush()
}

/// Reads an `obs_id,group` CSV.
pub fn load_groups(path: impl AsRef<Path>) -> Result<GroupMap, SampleError> {
    let mut rdr = csv_reader(open(path.as_ref())?);
    let mut pairs = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| malformed(&e))?;
        if rec.len() != 2 {
            return Err(SampleError::MalformedCsv {
                line: rec.position().map(|p| p.line()).unwrap_or(0),
                reason: "group rows need exactly obs_id,group".into(),
            });
        }
        pairs.push((rec[0].to_string(), rec[1].to_string()));
    }
    GroupMap::from_pairs(pairs)
}

pub fn write_groups_csv<W: Write>(groups: &GroupMap, w: W) -> std::io::Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["obs_id", "group"])?;
    for (o, g) in groups.assignment() {
        wtr.write_record([o, g])?;
    }
    wtr.flush()
}
