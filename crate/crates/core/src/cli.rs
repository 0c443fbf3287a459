//! Command-line front end.
//!
//! Exit codes: 0 on success, 1 on any input or validation error (a JSON
//! object with `error` and `message` is printed on stderr), 2 when a
//! diagnostic flag fires under `--strict`.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{ArgAction, Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use crate::influence::{self, GroupConflict, InfluenceConfig, DEFAULT_CONFLICT_THRESHOLD};
use crate::leverage::{self, KlMethod, LeverageConfig};
use crate::linear_oracle::{self, LinearModelSpec};
use crate::outliers;
use crate::sample_store::{self, Family, FamilySpec, GroupMap, Metadata};

/// Seed used when `--seed` is not given.
pub const DEFAULT_SEED: u64 = 20_240_917;

/// Environment variable capping the worker thread count.
pub const THREADS_ENV: &str = "BAYES_LENS_THREADS";

#[derive(Debug, Parser)]
#[command(name = "bayes-lens", version, about = "Influence, leverage and outlier diagnostics from posterior draws")]
pub struct RunConfig {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// LINF, DINF, CLINF and the WAIC/variance penalties.
    Influence(InfluenceArgs),
    /// Same as `influence`, with a group map required.
    Conflict(InfluenceArgs),
    /// Bayesian hat-values from predictive draws.
    Leverage(LeverageArgs),
    /// Outlier matrix, CLOUT and its eigensystem.
    Outliers(OutlierArgs),
    /// Closed-form diagnostics of a conjugate linear model.
    Oracle(OracleArgs),
    /// Exact posterior draws from a conjugate linear model.
    Simulate(SimulateArgs),
}

#[derive(Debug, Args)]
pub struct OutArgs {
    /// Output directory, created if absent.
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct InfluenceArgs {
    /// Log-likelihood CSV: one column per observation, one row per draw.
    #[arg(long)]
    pub loglik: PathBuf,
    /// Metadata JSON with per-draw chain labels.
    #[arg(long)]
    pub meta: PathBuf,
    /// `obs_id,group` CSV, or `all-in-one`.
    #[arg(long)]
    pub groups: Option<String>,
    /// Include the factor 2 in group-level p_V.
    #[arg(long, default_value_t = true, action = ArgAction::Set)]
    pub pv_group_factor: bool,
    /// p_V / p_W level that counts as conflict.
    #[arg(long, default_value_t = DEFAULT_CONFLICT_THRESHOLD)]
    pub threshold: f64,
    /// Exit with status 2 when conflict is flagged.
    #[arg(long)]
    pub strict: bool,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Args)]
pub struct LeverageArgs {
    /// Predictive-parameter CSV with `<obs_id>.<param>` columns.
    #[arg(long)]
    pub pred: PathBuf,
    #[arg(long)]
    pub meta: PathBuf,
    /// `obs_id,group` CSV; adds group leverage sums.
    #[arg(long)]
    pub groups: Option<String>,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    /// Average both KL directions.
    #[arg(long)]
    pub kl_symmetrize: bool,
    /// Estimate each KL from this many replicates instead of the closed form.
    #[arg(long)]
    pub replicates: Option<usize>,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Args)]
pub struct OutlierArgs {
    #[arg(long)]
    pub loglik: PathBuf,
    #[arg(long)]
    pub pred: PathBuf,
    #[arg(long)]
    pub meta: PathBuf,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    #[arg(long)]
    pub kl_symmetrize: bool,
    /// Adds a truncated CLOUT column using the top `m` eigenvalues.
    #[arg(long)]
    pub trunc_rank: Option<usize>,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Args)]
pub struct OracleArgs {
    /// Model JSON with keys `X`, `y`, `sigma2` and optional `Psi`.
    #[arg(long)]
    pub spec: PathBuf,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Model JSON; a random flat-prior model is generated when absent.
    #[arg(long)]
    pub spec: Option<PathBuf>,
    /// Observations in a generated model.
    #[arg(long, default_value_t = 40)]
    pub n: usize,
    /// Coefficients in a generated model, intercept included.
    #[arg(long, default_value_t = 2)]
    pub p: usize,
    #[arg(long, default_value_t = 4000)]
    pub draws: usize,
    #[arg(long, default_value_t = 4)]
    pub chains: usize,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    /// Zero-based row turned into a response outlier.
    #[arg(long, requires = "plant_leverage")]
    pub plant_outlier: Option<usize>,
    /// Zero-based row turned into a high-leverage point.
    #[arg(long, requires = "plant_outlier")]
    pub plant_leverage: Option<usize>,
    /// Outlier distance from the fitted value, in residual sd.
    #[arg(long, default_value_t = 8.0)]
    pub outlier_scale: f64,
    /// Leverage shift along the first nonconstant column, in column sd.
    #[arg(long, default_value_t = 5.0)]
    pub leverage_shift: f64,
    #[command(flatten)]
    pub out: OutArgs,
}

/// A failure reported as exit status 1.
#[derive(Debug)]
pub struct CliError {
    pub code: &'static str,
    pub message: String,
}

macro_rules! cli_from {
    ($($t:ty),*) => {$(
        impl From<$t> for CliError {
            fn from(e: $t) -> Self {
                CliError { code: e.code(), message: e.to_string() }
            }
        }
    )*};
}
cli_from!(
    sample_store::SampleError,
    influence::InfluenceError,
    leverage::LeverageError,
    outliers::OutlierError,
    linear_oracle::OracleError
);

impl CliError {
    fn new(code: &'static str, message: impl Into<String>) -> Self {
        Self {
            code,
            message: message.into(),
        }
    }

    fn io(path: &Path, e: std::io::Error) -> Self {
        Self::new("Io", format!("{}: {e}", path.display()))
    }

    pub fn to_json(&self) -> String {
        json!({ "error": self.code, "message": self.message }).to_string()
    }
}

type CliResult = Result<i32, CliError>;

fn prepare_out(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

fn write_file(
    dir: &Path,
    name: &str,
    f: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>,
) -> Result<(), CliError> {
    let path = dir.join(name);
    let file = File::create(&path).map_err(|e| CliError::io(&path, e))?;
    let mut w = BufWriter::new(file);
    f(&mut w)
        .and_then(|_| w.flush())
        .map_err(|e| CliError::io(&path, e))
}

fn write_json(dir: &Path, name: &str, value: &serde_json::Value) -> Result<(), CliError> {
    write_file(dir, name, |w| {
        serde_json::to_writer_pretty(&mut *w, value)?;
        writeln!(w)
    })
}

fn resolve_groups(spec: &str, obs_ids: &[String]) -> Result<GroupMap, CliError> {
    if spec == "all-in-one" {
        Ok(GroupMap::all_in_one(obs_ids, "all")?)
    } else {
        Ok(sample_store::load_groups(spec)?)
    }
}

fn group_rows(groups: &[GroupConflict]) -> Vec<serde_json::Value> {
    groups
        .iter()
        .map(|g| match &g.ratio {
            Ok(r) => json!({
                "group": g.group, "n_members": g.n_members, "p_v": g.p_v, "p_w": g.p_w,
                "ratio": r.value, "ratio_mcse": r.mcse,
            }),
            Err(e) => json!({
                "group": g.group, "n_members": g.n_members, "p_v": g.p_v, "p_w": g.p_w,
                "ratio": null, "error": e.code(),
            }),
        })
        .collect()
}

fn check_threshold(t: f64) -> Result<(), CliError> {
    if !(t.is_finite() && t > 0.0) {
        return Err(CliError::new("InvalidFlag", format!("--threshold {t} must be positive")));
    }
    Ok(())
}

pub fn cmd_influence(args: &InfluenceArgs, require_groups: bool) -> CliResult {
    check_threshold(args.threshold)?;
    if require_groups && args.groups.is_none() {
        return Err(CliError::new("InvalidFlag", "conflict needs --groups"));
    }
    let samples = sample_store::load_samples(&args.loglik, &args.meta)?;
    let config = InfluenceConfig {
        conflict_threshold: args.threshold,
    };
    let report = influence::influence_report(&samples, &config)?;
    let groups = match &args.groups {
        Some(g) => {
            let map = resolve_groups(g, samples.obs_ids())?;
            Some(influence::cross_conflict(&samples, &map, args.pv_group_factor)?)
        }
        None => None,
    };
    let dir = &args.out.out;
    prepare_out(dir)?;
    write_file(dir, "influence_report.csv", |w| report.write_csv(w))?;
    write_file(dir, "influence_totals.csv", |w| report.write_totals_csv(w))?;
    let mut doc = serde_json::to_value(&report).expect("report serializes");
    let mut flagged = report.conflict_flagged;
    if let Some(groups) = &groups {
        doc["cross_conflict"] = serde_json::Value::Array(group_rows(groups));
        doc["pv_group_factor"] = json!(args.pv_group_factor);
        flagged |= groups
            .iter()
            .any(|g| g.ratio.as_ref().is_ok_and(|r| r.value >= args.threshold));
        write_file(dir, "cross_conflict.csv", |w| {
            let mut wtr = csv::Writer::from_writer(w);
            wtr.write_record(["group", "n_members", "p_v", "p_w", "ratio", "ratio_mcse", "error"])?;
            for g in groups {
                let (ratio, se, err) = match &g.ratio {
                    Ok(r) => (fmt(r.value), fmt(r.mcse), String::new()),
                    Err(e) => (String::new(), String::new(), e.code().to_string()),
                };
                wtr.write_record([
                    g.group.clone(),
                    g.n_members.to_string(),
                    fmt(g.p_v),
                    fmt(g.p_w),
                    ratio,
                    se,
                    err,
                ])?;
            }
            wtr.flush()
        })?;
    }
    write_json(dir, "influence_report.json", &doc)?;
    Ok(if flagged && args.strict { 2 } else { 0 })
}

fn fmt(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn cmd_leverage(args: &LeverageArgs) -> CliResult {
    let pred = sample_store::load_predictive(&args.pred, &args.meta)?;
    let config = LeverageConfig {
        seed: args.seed,
        symmetrize: args.kl_symmetrize,
        method: replicate_method(args.replicates)?,
    };
    let h = leverage::hat_values(&pred, &config)?;
    if h.split_half {
        eprintln!("warning: single chain; hat-values pair its first and second halves");
    }
    let floored: usize = h.floored.iter().sum();
    if floored > 0 {
        eprintln!("warning: {floored} negative replicate KL estimates set to zero");
    }
    let dir = &args.out.out;
    prepare_out(dir)?;
    write_file(dir, "hat_values.csv", |w| h.write_csv(w))?;
    let mut doc = serde_json::to_value(&h).expect("hat-values serialize");
    if let Some(g) = &args.groups {
        let map = resolve_groups(g, &h.obs_ids)?;
        let sums = leverage::group_leverage(&h, &map)?;
        doc["group_leverage"] = sums
            .iter()
            .map(|(g, v)| json!({ "group": g, "leverage": v }))
            .collect();
    }
    write_json(dir, "hat_values.json", &doc)?;
    Ok(0)
}

fn replicate_method(r: Option<usize>) -> Result<KlMethod, CliError> {
    match r {
        None => Ok(KlMethod::ClosedForm),
        Some(0) => Err(CliError::new("NoReplicates", "--replicates must be positive")),
        Some(r) => Ok(KlMethod::Replicates(r)),
    }
}

pub fn cmd_outliers(args: &OutlierArgs) -> CliResult {
    let samples = sample_store::load_samples(&args.loglik, &args.meta)?;
    let pred = sample_store::load_predictive(&args.pred, &args.meta)?;
    pred.check_aligned(&samples)?;
    if let Some(m) = args.trunc_rank {
        if m == 0 || m > samples.n_obs() {
            return Err(outliers::OutlierError::RankOutOfRange {
                m,
                n: samples.n_obs(),
            }
            .into());
        }
    }
    let v = influence::loglik_covariance(&samples)?;
    let h = leverage::hat_values(
        &pred,
        &LeverageConfig {
            seed: args.seed,
            symmetrize: args.kl_symmetrize,
            method: KlMethod::ClosedForm,
        },
    )?;
    let dec = outliers::outlier_matrix(&v, &h)?;
    let dir = &args.out.out;
    prepare_out(dir)?;
    write_file(dir, "clout.csv", |w| {
        dec.write_clout_csv(w, args.trunc_rank)
    })?;
    write_file(dir, "scree.csv", |w| dec.write_scree_csv(w))?;
    write_json(dir, "outlier_decomposition.json", &dec.to_json())?;
    Ok(0)
}

fn load_spec(path: &Path) -> Result<LinearModelSpec, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_str(&text)
        .map_err(|e| CliError::new("InvalidSpec", format!("{}: {e}", path.display())))
}

pub fn cmd_oracle(args: &OracleArgs) -> CliResult {
    let spec = load_spec(&args.spec)?;
    let d = linear_oracle::fit(&spec)?;
    let dir = &args.out.out;
    prepare_out(dir)?;
    write_json(dir, "linear_diagnostics.json", &d.to_json())?;
    write_file(dir, "linear_diagnostics.csv", |w| d.write_csv(w))?;
    Ok(0)
}

/// A random flat-prior model whose first column is an intercept.
pub fn demo_spec(n: usize, p: usize, seed: u64) -> Result<LinearModelSpec, CliError> {
    if n < 3 || p == 0 || p >= n {
        return Err(CliError::new("InvalidFlag", format!("need 0 < p < n and n >= 3, got n={n}, p={p}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut spec = linear_oracle::random_spec(&mut rng, n, p, false);
    spec.x.column_mut(0).fill(1.0);
    Ok(LinearModelSpec::new(spec.x, spec.y, spec.sigma2, spec.psi)?)
}

pub fn cmd_simulate(args: &SimulateArgs) -> CliResult {
    let mut spec = match &args.spec {
        Some(path) => load_spec(path)?,
        None => demo_spec(args.n, args.p, args.seed)?,
    };
    if let (Some(o), Some(l)) = (args.plant_outlier, args.plant_leverage) {
        spec = linear_oracle::plant_anomalies(&spec, o, args.outlier_scale, l, args.leverage_shift)?;
    }
    let draws = linear_oracle::exact_sampler(&spec, args.draws, args.chains, args.seed)?;
    let meta = Metadata {
        chains: draws.loglik.draw_chain().to_vec(),
        families: Some(FamilySpec::Shared(Family::NormalKnownVar)),
        trials: None,
    };
    let dir = &args.out.out;
    prepare_out(dir)?;
    write_json(dir, "spec.json", &serde_json::to_value(&spec).expect("spec serializes"))?;
    write_file(dir, "loglik.csv", |w| sample_store::write_loglik_csv(&draws.loglik, w))?;
    write_file(dir, "pred.csv", |w| sample_store::write_predictive_csv(&draws.pred, w))?;
    write_file(dir, "meta.json", |w| sample_store::write_metadata(&meta, w))?;
    Ok(0)
}

/// Caps the global thread pool from [`THREADS_ENV`], if set.
pub fn init_threads() -> Result<(), CliError> {
    let Ok(raw) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| CliError::new("InvalidFlag", format!("{THREADS_ENV}={raw} is not a positive integer")))?;
    // a pool may already exist when called twice in one process
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

pub fn run(config: &RunConfig) -> CliResult {
    init_threads()?;
    match &config.command {
        Command::Influence(a) => cmd_influence(a, false),
        Command::Conflict(a) => cmd_influence(a, true),
        Command::Leverage(a) => cmd_leverage(a),
        Command::Outliers(a) => cmd_outliers(a),
        Command::Oracle(a) => cmd_oracle(a),
        Command::Simulate(a) => cmd_simulate(a),
    }
}

/// Parses `args`, runs the command and returns the exit status.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let config = match RunConfig::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(&config) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("{}", e.to_json());
            1
        }
    }
}
