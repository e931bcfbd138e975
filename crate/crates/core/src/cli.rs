//! Command-line front end.
//!
//! Each command resolves its configuration as: built-in defaults, then the
//! `--config` JSON file, then individual flags. The resolved configuration is
//! echoed into every output together with the crate version, the seed and a
//! SHA-256 hash of the configuration.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Map, Value};
use sha2::{Digest, Sha256};

use crate::bounds::{BoundReport, PacBoundInputs};
use crate::eoa::{boundary_polyline, build_eoa, EllipsoidRecord};
use crate::error::{Result, SpsError};
use crate::par::{with_threads, ExecMode};
use crate::problem::{extend, RegressionData};
use crate::sim::{coverage_experiment, lambda_sweep, size_table, CoverageScenario, SweepConfig, SweepReport, TableConfig};
use crate::sps::{sps_init, Confidence, SpsState, SpsStateRecord};

#[derive(Debug, Parser)]
#[command(name = "sps-ridge", version, about = "Sign-perturbed-sums confidence ellipsoids for ridge regression")]
pub struct Cli {
    /// Master seed (overrides the config file).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output file; stdout when absent.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    /// Worker threads for Monte Carlo runs (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Run Monte Carlo trials on the calling thread only.
    #[arg(long, global = true)]
    pub sequential: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build the outer ellipsoid for a CSV data file.
    Region(RegionArgs),
    /// Evaluate the size bound and the intermediate lemma bounds.
    Bound(BoundArgs),
    /// Monte Carlo coverage of one region type.
    Coverage(CoverageArgs),
    /// Empirical and theoretical size table over an n-grid.
    Table(TableArgs),
    /// Ellipsoids for several ridge parameters on one realization.
    Sweep(SweepArgs),
}

#[derive(Debug, Args)]
pub struct RegionArgs {
    /// CSV with columns phi1..phid,y and a header row.
    pub data: PathBuf,
    /// Confidence level, e.g. 0.9 or 9/10.
    #[arg(long, default_value = "0.9")]
    pub p: String,
    #[arg(long)]
    pub lambda: f64,
    /// Saved perturbation state (JSON); replaces --p and --seed.
    #[arg(long)]
    pub state: Option<PathBuf>,
    #[arg(long, default_value_t = 200)]
    pub polyline_points: usize,
}

#[derive(Debug, Args)]
pub struct BoundArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub d: Option<usize>,
    #[arg(long)]
    pub delta: Option<f64>,
    #[arg(long)]
    pub m: Option<usize>,
    #[arg(long)]
    pub q: Option<usize>,
    #[arg(long)]
    pub sigma: Option<f64>,
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub ell: Option<f64>,
    #[arg(long)]
    pub kappa: Option<f64>,
    #[arg(long)]
    pub rho: Option<f64>,
    #[arg(long)]
    pub lambda_min_r_tilde: Option<f64>,
}

#[derive(Debug, Args)]
pub struct CoverageArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// indicator | rr-eoa | ls-eoa | asymptotic
    #[arg(long)]
    pub region: Option<String>,
    #[arg(long)]
    pub p: Option<String>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub trials: Option<usize>,
}

#[derive(Debug, Args)]
pub struct TableArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Comma-separated sample sizes.
    #[arg(long, value_delimiter = ',')]
    pub n_grid: Option<Vec<usize>>,
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub trials: Option<usize>,
    #[arg(long)]
    pub delta: Option<f64>,
    /// ensemble | seed-median
    #[arg(long)]
    pub aggregation: Option<String>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub n: Option<usize>,
    /// Comma-separated ridge parameters.
    #[arg(long, value_delimiter = ',')]
    pub lambdas: Option<Vec<f64>>,
}

/// Successful outcomes and their exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Success,
    /// A valid run whose region has infinite radius.
    Unbounded,
}

impl Outcome {
    pub fn code(self) -> u8 {
        match self {
            Outcome::Success => 0,
            Outcome::Unbounded => 2,
        }
    }
}

/// Loads `path` (if any) as a JSON object and applies the non-null `overrides`.
fn resolve<T: serde::de::DeserializeOwned>(path: Option<&Path>, overrides: Vec<(&str, Value)>) -> Result<T> {
    let mut map = match path {
        Some(p) => match serde_json::from_str::<Value>(&fs::read_to_string(p)?)? {
            Value::Object(m) => m,
            _ => return Err(SpsError::Config(format!("{} is not a JSON object", p.display()))),
        },
        None => Map::new(),
    };
    for (k, v) in overrides {
        if !v.is_null() {
            map.insert(k.to_string(), v);
        }
    }
    serde_json::from_value(Value::Object(map)).map_err(|e| SpsError::Config(e.to_string()))
}

pub fn config_hash<T: Serialize>(config: &T) -> Result<String> {
    let canonical = serde_json::to_vec(config)?;
    Ok(hex::encode(Sha256::digest(&canonical)))
}

fn envelope<C: Serialize, R: Serialize>(command: &str, seed: u64, config: &C, result: &R) -> Result<Value> {
    Ok(json!({
        "tool": "sps-ridge",
        "version": env!("CARGO_PKG_VERSION"),
        "command": command,
        "seed": seed,
        "config_hash": config_hash(config)?,
        "config": config,
        "result": result,
    }))
}

fn emit(out: Option<&Path>, bytes: &[u8]) -> Result<()> {
    match out {
        Some(p) => fs::write(p, bytes)?,
        None => std::io::stdout().lock().write_all(bytes)?,
    }
    Ok(())
}

fn emit_json(out: Option<&Path>, value: &Value) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    emit(out, text.as_bytes())
}

/// `<out>` with its extension replaced by `suffix`.
fn sibling(out: &Path, suffix: &str) -> PathBuf {
    let stem = out.file_stem().map_or_else(|| "out".into(), |s| s.to_string_lossy().into_owned());
    out.with_file_name(format!("{stem}{suffix}"))
}

/// CSV body to `--out` (or stdout), with the JSON envelope next to it as
/// `<stem>.meta.json` when writing to a file.
fn emit_csv(out: Option<&Path>, csv: &[u8], meta: &Value) -> Result<()> {
    emit(out, csv)?;
    if let Some(p) = out {
        emit_json(Some(&sibling(p, ".meta.json")), meta)?;
    }
    Ok(())
}

fn polyline_csv(points: &[[f64; 2]]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let io = |e: csv::Error| SpsError::Io(e.into());
    w.write_record(["theta1", "theta2"]).map_err(io)?;
    for p in points {
        w.write_record([format!("{:?}", p[0]), format!("{:?}", p[1])]).map_err(io)?;
    }
    w.into_inner().map_err(|e| SpsError::Io(e.into_error()))
}

#[derive(Debug, Serialize)]
struct RegionConfig {
    data: PathBuf,
    n: usize,
    d: usize,
    p: Confidence,
    lambda: f64,
    state: SpsStateRecord,
    polyline_points: usize,
}

fn cmd_region(cli: &Cli, args: &RegionArgs) -> Result<Outcome> {
    let data = RegressionData::from_csv_path(&args.data)?;
    let state: SpsState = match &args.state {
        Some(path) => {
            let record: SpsStateRecord = serde_json::from_str(&fs::read_to_string(path)?)?;
            SpsState::from_record(&record)?
        }
        None => sps_init(args.p.parse()?, data.n(), cli.seed.unwrap_or(0))?,
    };
    let ep = extend(&data, args.lambda)?;
    let e = build_eoa(&ep, &state)?;
    let record = EllipsoidRecord::from_ellipsoid(&e)?;
    let boundary = if e.is_bounded() && e.dim() == 2 {
        boundary_polyline(&e, args.polyline_points)?
    } else {
        Vec::new()
    };
    let config = RegionConfig {
        data: args.data.clone(),
        n: data.n(),
        d: data.d(),
        p: state.confidence(),
        lambda: args.lambda,
        state: state.to_record(),
        polyline_points: args.polyline_points,
    };
    let result = json!({ "ellipsoid": record, "boundary": boundary });
    let value = envelope("region", state.seed(), &config, &result)?;
    let out = cli.out.as_deref();
    match cli.format {
        Format::Json => emit_json(out, &value)?,
        Format::Csv => emit_csv(out, &polyline_csv(&boundary)?, &value)?,
    }
    if let (Some(p), Format::Json, false) = (out, cli.format, boundary.is_empty()) {
        emit(Some(&sibling(p, ".boundary.csv")), &polyline_csv(&boundary)?)?;
    }
    Ok(if e.is_bounded() { Outcome::Success } else { Outcome::Unbounded })
}

fn cmd_bound(cli: &Cli, a: &BoundArgs) -> Result<Outcome> {
    let inputs: PacBoundInputs = resolve(
        a.config.as_deref(),
        vec![
            ("n", json!(a.n)),
            ("d", json!(a.d)),
            ("delta", json!(a.delta)),
            ("m", json!(a.m)),
            ("q", json!(a.q)),
            ("sigma", json!(a.sigma)),
            ("lambda", json!(a.lambda)),
            ("ell", json!(a.ell)),
            ("kappa", json!(a.kappa)),
            ("rho", json!(a.rho)),
            ("lambda_min_r_tilde", json!(a.lambda_min_r_tilde)),
        ],
    )?;
    let report = BoundReport::evaluate(&inputs)?;
    let value = envelope("bound", cli.seed.unwrap_or(0), &inputs, &report)?;
    match cli.format {
        Format::Json => emit_json(cli.out.as_deref(), &value)?,
        Format::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            let io = |e: csv::Error| SpsError::Io(e.into());
            w.serialize(report.inputs).map_err(io)?;
            let mut csv = w.into_inner().map_err(|e| SpsError::Io(e.into_error()))?;
            csv.extend(
                format!(
                    "theorem2_bound,{}\ntheorem2_bound_unregularized,{}\nmin_sample_size,{}\n",
                    crate::eoa::ext_real::format(report.theorem2_bound),
                    crate::eoa::ext_real::format(report.theorem2_bound_unregularized),
                    report.min_sample_size
                )
                .bytes(),
            );
            emit_csv(cli.out.as_deref(), &csv, &value)?;
        }
    }
    Ok(Outcome::Success)
}

fn exec_mode(cli: &Cli) -> ExecMode {
    if cli.sequential {
        ExecMode::Sequential
    } else {
        ExecMode::Parallel
    }
}

fn cmd_coverage(cli: &Cli, a: &CoverageArgs) -> Result<Outcome> {
    let sc: CoverageScenario = resolve(
        a.config.as_deref(),
        vec![
            ("region", json!(a.region)),
            ("p", json!(a.p)),
            ("n", json!(a.n)),
            ("lambda", json!(a.lambda)),
            ("trials", json!(a.trials)),
            ("seed", json!(cli.seed)),
        ],
    )?;
    let result = with_threads(cli.threads, || coverage_experiment(&sc, exec_mode(cli)))?;
    let value = envelope("coverage", sc.seed, &sc, &result)?;
    match cli.format {
        Format::Json => emit_json(cli.out.as_deref(), &value)?,
        Format::Csv => {
            let csv = format!(
                "coverage,ci_lo,ci_hi,hits,trials\n{:?},{:?},{:?},{},{}\n",
                result.coverage, result.ci[0], result.ci[1], result.hits, result.trials
            );
            emit_csv(cli.out.as_deref(), csv.as_bytes(), &value)?;
        }
    }
    Ok(Outcome::Success)
}

fn cmd_table(cli: &Cli, a: &TableArgs) -> Result<Outcome> {
    let cfg: TableConfig = resolve(
        a.config.as_deref(),
        vec![
            ("n_grid", json!(a.n_grid)),
            ("lambda", json!(a.lambda)),
            ("trials", json!(a.trials)),
            ("delta", json!(a.delta)),
            ("aggregation", json!(a.aggregation)),
            ("seed", json!(cli.seed)),
        ],
    )?;
    let report = with_threads(cli.threads, || size_table(&cfg, exec_mode(cli)))?;
    let value = envelope("table", cfg.seed, &cfg, &report)?;
    match cli.format {
        Format::Json => emit_json(cli.out.as_deref(), &value)?,
        Format::Csv => {
            let mut csv = Vec::new();
            report.write_csv(&mut csv)?;
            emit_csv(cli.out.as_deref(), &csv, &value)?;
        }
    }
    Ok(Outcome::Success)
}

fn cmd_sweep(cli: &Cli, a: &SweepArgs) -> Result<Outcome> {
    let cfg: SweepConfig = resolve(
        a.config.as_deref(),
        vec![("n", json!(a.n)), ("lambdas", json!(a.lambdas)), ("seed", json!(cli.seed))],
    )?;
    let report: SweepReport = lambda_sweep(&cfg)?;
    let value = envelope("sweep", cfg.seed, &cfg, &report)?;
    match cli.format {
        Format::Json => emit_json(cli.out.as_deref(), &value)?,
        Format::Csv => {
            let mut csv = Vec::new();
            report.write_polylines_csv(&mut csv)?;
            emit_csv(cli.out.as_deref(), &csv, &value)?;
        }
    }
    let unbounded = report.entries.iter().any(|e| e.ellipsoid.status == "unbounded");
    Ok(if unbounded { Outcome::Unbounded } else { Outcome::Success })
}

pub fn run(cli: &Cli) -> Result<Outcome> {
    match &cli.command {
        Command::Region(a) => cmd_region(cli, a),
        Command::Bound(a) => cmd_bound(cli, a),
        Command::Coverage(a) => cmd_coverage(cli, a),
        Command::Table(a) => cmd_table(cli, a),
        Command::Sweep(a) => cmd_sweep(cli, a),
    }
}
