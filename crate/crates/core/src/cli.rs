//! Command-line front end behind the `bw` binary.
//!
//! Every command writes its artifacts into `--out-dir` and embeds a
//! [`RunManifest`]; reports are JSON, tables are CSV. Exit codes: 0 success,
//! 2 validation error, 3 numerical error, 4 I/O error.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::balance;
use crate::data::{self, IngestConfig};
use crate::error::{Error, ErrorKind, Result};
use crate::estimators::{Method, VarianceMethod};
use crate::inference::{self, Recipe};
use crate::propensity::{self, FitOptions};
use crate::simulation::{self, SimulationConfig};
use crate::weights::{self, WeightScheme};

#[derive(Debug, Parser)]
#[command(name = "bw", version, about = "Propensity-score balancing weights")]
pub struct Cli {
    /// Delimited data file with a header row.
    #[arg(long, global = true)]
    pub data: Option<PathBuf>,
    /// TOML ingestion config naming the treatment, outcome and covariate columns.
    #[arg(long, global = true)]
    pub schema: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true, default_value = ".")]
    pub out_dir: PathBuf,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit, weight, estimate and attach a standard error.
    Estimate(EstimateArgs),
    /// Balance diagnostics; never reads the outcome column.
    Balance(BalanceArgs),
    /// Per-unit weights and effective sample sizes.
    Weights(WeightsArgs),
    /// Monte Carlo study from a TOML config.
    Simulate(SimulateArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum VarianceFlag {
    Sandwich,
    Bootstrap,
    None,
}

#[derive(Debug, Args)]
pub struct EstimateArgs {
    #[arg(long)]
    pub scheme: String,
    /// Augmented (doubly robust) estimator with per-arm outcome regressions.
    #[arg(long, conflicts_with = "ps_adjusted")]
    pub augmented: bool,
    /// Regression of the outcome on treatment and the estimated score.
    #[arg(long)]
    pub ps_adjusted: bool,
    #[arg(long, num_args = 2, value_names = ["J", "K"], default_values_t = [1, 0])]
    pub contrast: Vec<usize>,
    #[arg(long, default_value_t = 0.95)]
    pub ci_level: f64,
    #[arg(long, value_enum, default_value_t = VarianceFlag::Sandwich)]
    pub variance: VarianceFlag,
    #[arg(long, default_value_t = 1000)]
    pub bootstrap_reps: usize,
    /// Ridge penalty for the propensity fit (separation workaround).
    #[arg(long, default_value_t = 0.0)]
    pub ridge: f64,
}

#[derive(Debug, Args)]
pub struct BalanceArgs {
    #[arg(long, default_value = "overlap")]
    pub scheme: String,
    #[arg(long, num_args = 2, value_names = ["J", "K"], default_values_t = [1, 0])]
    pub contrast: Vec<usize>,
    /// Histogram bins on [0, 1] for the score distribution.
    #[arg(long, default_value_t = 10)]
    pub bins: usize,
    #[arg(long, default_value_t = 0.0)]
    pub ridge: f64,
}

#[derive(Debug, Args)]
pub struct WeightsArgs {
    #[arg(long)]
    pub scheme: String,
    #[arg(long, default_value_t = 0.0)]
    pub ridge: f64,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// TOML simulation config.
    #[arg(long)]
    pub config: PathBuf,
    /// Overrides `harness.replicates`.
    #[arg(long)]
    pub reps: Option<usize>,
    /// Output directory; defaults to `--out-dir`.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Provenance block embedded in every output.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub flags: BTreeMap<String, Value>,
    /// SHA-256 of the primary input file.
    pub input_digest: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub schema_digest: Option<String>,
    pub seed: u64,
    pub version: String,
    /// Seconds since the Unix epoch; the only field that varies between
    /// identical runs.
    pub timestamp: u64,
}

impl RunManifest {
    fn new(command: &str, flags: BTreeMap<String, Value>, input: &[u8], seed: u64) -> Self {
        Self {
            command: command.to_string(),
            flags,
            input_digest: sha256_hex(input),
            schema_digest: None,
            seed,
            version: env!("CARGO_PKG_VERSION").to_string(),
            timestamp: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
        }
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn required<'a>(value: &'a Option<PathBuf>, flag: &str) -> Result<&'a Path> {
    value
        .as_deref()
        .ok_or_else(|| Error::Config(format!("--{flag} is required")))
}

fn contrast_pair(v: &[usize]) -> (usize, usize) {
    (v[0], v[1])
}

fn read_file(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| {
        Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))
    })
}

fn write_file(dir: &Path, name: &str, bytes: &[u8]) -> Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join(name), bytes)?;
    Ok(())
}

fn to_json(value: &impl Serialize) -> Result<Vec<u8>> {
    let mut bytes =
        serde_json::to_vec_pretty(value).map_err(|e| Error::Internal(e.to_string()))?;
    bytes.push(b'\n');
    Ok(bytes)
}

fn csv_bytes(f: impl FnOnce(&mut Vec<u8>) -> Result<()>) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    f(&mut buf)?;
    Ok(buf)
}

struct Inputs {
    data_bytes: Vec<u8>,
    schema_bytes: Vec<u8>,
    config: IngestConfig,
}

fn read_inputs(cli: &Cli) -> Result<Inputs> {
    let data_path = required(&cli.data, "data")?;
    let schema_path = required(&cli.schema, "schema")?;
    let data_bytes = read_file(data_path)?;
    let schema_bytes = read_file(schema_path)?;
    let text = String::from_utf8(schema_bytes.clone())
        .map_err(|_| Error::Config("schema file is not UTF-8".into()))?;
    Ok(Inputs {
        data_bytes,
        schema_bytes,
        config: IngestConfig::from_toml_str(&text)?,
    })
}

fn base_flags(cli: &Cli) -> BTreeMap<String, Value> {
    let mut flags = BTreeMap::new();
    let path = |p: &Option<PathBuf>| p.as_ref().map(|p| p.display().to_string());
    flags.insert("data".into(), json!(path(&cli.data)));
    flags.insert("schema".into(), json!(path(&cli.schema)));
    flags.insert("out_dir".into(), json!(cli.out_dir.display().to_string()));
    flags.insert("seed".into(), json!(cli.seed.unwrap_or(0)));
    flags
}

fn fit_options(ridge: f64) -> Result<FitOptions> {
    if !(ridge >= 0.0 && ridge.is_finite()) {
        return Err(Error::Config(format!("--ridge must be >= 0, got {ridge}")));
    }
    Ok(FitOptions {
        ridge,
        ..FitOptions::default()
    })
}

fn cmd_estimate(cli: &Cli, args: &EstimateArgs) -> Result<Value> {
    let inputs = read_inputs(cli)?;
    let dataset = data::ingest_from_reader(inputs.data_bytes.as_slice(), &inputs.config)?;
    let scheme: WeightScheme = args.scheme.parse()?;
    scheme.check_arms(dataset.arms())?;
    let seed = cli.seed.unwrap_or(0);
    let method = if args.augmented {
        Method::Augmented
    } else if args.ps_adjusted {
        Method::PsAdjustedRegression
    } else {
        Method::Hajek
    };
    let recipe = Recipe {
        scheme,
        method,
        contrast: contrast_pair(&args.contrast),
        fit_options: fit_options(args.ridge)?,
        outcome_family: dataset.family(),
    };
    let (mut estimate, fit) = recipe.run_with_fit(&dataset)?;
    let variance = match args.variance {
        VarianceFlag::None => None,
        VarianceFlag::Sandwich => Some(inference::sandwich_variance(
            &dataset, &fit, scheme, &estimate,
        )?),
        VarianceFlag::Bootstrap => Some(inference::bootstrap_variance(
            &dataset,
            &recipe,
            args.bootstrap_reps,
            seed,
        )?),
    };
    match &variance {
        Some(v) => inference::attach(&mut estimate, v, args.ci_level)?,
        None => {
            inference::confidence_interval(0.0, 0.0, args.ci_level)?;
            estimate.variance_method = VarianceMethod::None;
        }
    }
    // Design summary under the weights the estimate uses.
    let balance_scheme = match method {
        Method::PsAdjustedRegression => WeightScheme::Overlap,
        _ => scheme,
    };
    let w = weights::compute_weights(&fit, dataset.design(), balance_scheme)?;
    let report = balance::balance_report(dataset.design(), &w, contrast_pair(&args.contrast))?;

    let mut flags = base_flags(cli);
    flags.insert("scheme".into(), json!(scheme.to_string()));
    flags.insert("augmented".into(), json!(args.augmented));
    flags.insert("ps_adjusted".into(), json!(args.ps_adjusted));
    flags.insert("contrast".into(), json!(args.contrast));
    flags.insert("ci_level".into(), json!(args.ci_level));
    flags.insert("variance".into(), json!(format!("{:?}", args.variance).to_lowercase()));
    flags.insert("bootstrap_reps".into(), json!(args.bootstrap_reps));
    flags.insert("ridge".into(), json!(args.ridge));
    let mut manifest = RunManifest::new("estimate", flags, &inputs.data_bytes, seed);
    manifest.schema_digest = Some(sha256_hex(&inputs.schema_bytes));

    let out = json!({
        "manifest": manifest,
        "arm_labels": dataset.design().arm_labels(),
        "estimate": estimate,
        "variance": variance,
        "propensity": {
            "kind": fit.kind,
            "converged": fit.converged,
            "iterations": fit.iterations,
            "final_gradient_norm": fit.final_gradient_norm,
            "ridge": fit.ridge,
        },
        "balance": {
            "scheme": report.scheme,
            "max_abs_weighted_smd": report.max_abs_weighted_smd,
            "max_abs_unweighted_smd": report.max_abs_unweighted_smd,
            "ess_per_arm": report.ess_per_arm,
        },
    });
    write_file(&cli.out_dir, "estimate.json", &to_json(&out)?)?;
    Ok(out)
}

fn cmd_weights(cli: &Cli, args: &WeightsArgs) -> Result<Value> {
    let inputs = read_inputs(cli)?;
    let design = data::ingest_design_from_reader(inputs.data_bytes.as_slice(), &inputs.config)?;
    let scheme: WeightScheme = args.scheme.parse()?;
    scheme.check_arms(design.arms())?;
    let fit = propensity::fit(&design, &fit_options(args.ridge)?)?;
    let w = weights::compute_weights(&fit, &design, scheme)?;
    let csv = csv_bytes(|buf| weights::write_weights_csv(&w, &design, &fit, buf))?;

    let mut flags = base_flags(cli);
    flags.insert("scheme".into(), json!(scheme.to_string()));
    flags.insert("ridge".into(), json!(args.ridge));
    let mut manifest = RunManifest::new("weights", flags, &inputs.data_bytes, cli.seed.unwrap_or(0));
    manifest.schema_digest = Some(sha256_hex(&inputs.schema_bytes));
    let out = json!({
        "manifest": manifest,
        "scheme": scheme,
        "estimand": scheme.estimand_label(),
        "arm_labels": design.arm_labels(),
        "n_per_arm": design.arm_counts(),
        "ess_per_arm": w.ess_per_arm,
        "kept": w.kept.iter().filter(|&&k| k).count(),
        "weights_file": "weights.csv",
    });
    write_file(&cli.out_dir, "weights.csv", &csv)?;
    write_file(&cli.out_dir, "weights_summary.json", &to_json(&out)?)?;
    Ok(out)
}

fn cmd_balance(cli: &Cli, args: &BalanceArgs) -> Result<Value> {
    let inputs = read_inputs(cli)?;
    // Design only: the outcome column is neither read nor required.
    let design = data::ingest_design_from_reader(inputs.data_bytes.as_slice(), &inputs.config)?;
    let scheme: WeightScheme = args.scheme.parse()?;
    scheme.check_arms(design.arms())?;
    let fit = propensity::fit(&design, &fit_options(args.ridge)?)?;
    let w = weights::compute_weights(&fit, &design, scheme)?;
    let contrast = contrast_pair(&args.contrast);
    let report = balance::balance_report(&design, &w, contrast)?;
    let score_arm = if design.arms() == 2 { 1 } else { contrast.0 };
    let hist = balance::ps_histogram(&design, &fit, score_arm, args.bins)?;

    let smd_csv = csv_bytes(|buf| report.write_smd_csv(buf))?;
    let baseline_csv = csv_bytes(|buf| report.baseline.write_csv(buf))?;
    let hist_csv =
        csv_bytes(|buf| balance::write_histogram_csv(&hist, design.arm_labels(), buf))?;

    let mut flags = base_flags(cli);
    flags.insert("scheme".into(), json!(scheme.to_string()));
    flags.insert("contrast".into(), json!(args.contrast));
    flags.insert("bins".into(), json!(args.bins));
    flags.insert("ridge".into(), json!(args.ridge));
    let mut manifest = RunManifest::new("balance", flags, &inputs.data_bytes, cli.seed.unwrap_or(0));
    manifest.schema_digest = Some(sha256_hex(&inputs.schema_bytes));
    let out = json!({
        "manifest": manifest,
        "report": report,
        "histogram_score_arm": score_arm,
        "files": ["balance.csv", "baseline.csv", "ps_histogram.csv"],
    });
    write_file(&cli.out_dir, "balance.csv", &smd_csv)?;
    write_file(&cli.out_dir, "baseline.csv", &baseline_csv)?;
    write_file(&cli.out_dir, "ps_histogram.csv", &hist_csv)?;
    write_file(&cli.out_dir, "balance.json", &to_json(&out)?)?;
    Ok(out)
}

fn cmd_simulate(cli: &Cli, args: &SimulateArgs) -> Result<Value> {
    let bytes = read_file(&args.config)?;
    let text = String::from_utf8(bytes.clone())
        .map_err(|_| Error::Config("config file is not UTF-8".into()))?;
    let config = SimulationConfig::from_toml_str(&text)?;
    let replicates = args.reps.unwrap_or(config.harness.replicates);
    let seed = cli.seed.unwrap_or(config.harness.seed);
    let analyses = config.resolve_analyses()?;
    let result = simulation::run_monte_carlo(
        &config.dgp,
        &analyses,
        &config.options(),
        replicates,
        seed,
    )?;
    let out_dir = args.out.clone().unwrap_or_else(|| cli.out_dir.clone());

    let mut flags = BTreeMap::new();
    flags.insert("config".into(), json!(args.config.display().to_string()));
    flags.insert("reps".into(), json!(replicates));
    flags.insert("seed".into(), json!(seed));
    flags.insert("out".into(), json!(out_dir.display().to_string()));
    let manifest = RunManifest::new("simulate", flags, &bytes, seed);
    let reps_csv = csv_bytes(|buf| result.write_replicates_csv(buf))?;
    let out = json!({
        "manifest": manifest,
        "result": result,
        "replicates_file": "replicates.csv",
    });
    write_file(&out_dir, "replicates.csv", &reps_csv)?;
    write_file(&out_dir, "simulation.json", &to_json(&out)?)?;
    Ok(out)
}

pub fn exit_code(kind: ErrorKind) -> i32 {
    match kind {
        ErrorKind::Validation => 2,
        ErrorKind::Numerical => 3,
        ErrorKind::Io => 4,
    }
}

/// Runs a parsed command, returning its JSON report.
pub fn execute(cli: &Cli) -> Result<Value> {
    match &cli.command {
        Command::Estimate(a) => cmd_estimate(cli, a),
        Command::Balance(a) => cmd_balance(cli, a),
        Command::Weights(a) => cmd_weights(cli, a),
        Command::Simulate(a) => cmd_simulate(cli, a),
    }
}

fn error_json(code: &str, message: &str) -> String {
    json!({ "error": { "code": code, "message": message } }).to_string()
}

/// Parses `args`, runs the command, prints the report (stdout) or a JSON
/// error (stderr), and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind as Clap;
            if matches!(e.kind(), Clap::DisplayHelp | Clap::DisplayVersion) {
                print!("{e}");
                return 0;
            }
            eprintln!("{}", error_json("usage", e.to_string().trim()));
            return 2;
        }
    };
    match execute(&cli) {
        Ok(report) => {
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            let _ = serde_json::to_writer_pretty(&mut lock, &report);
            let _ = writeln!(lock);
            0
        }
        Err(err) => {
            eprintln!("{}", error_json(err.code(), &err.to_string()));
            exit_code(err.kind())
        }
    }
}
