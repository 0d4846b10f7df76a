//! `cumout` — generate crisis-like synthetic data, detect cross-correlated
//! extreme events with the fourth-cumulant and RX detectors, and evaluate
//! them with ROC curves.
//!
//! Primary payloads (JSON/CSV) go to stdout unless `--out` is given;
//! progress and errors go to stderr. Every error line starts with a
//! machine-parsable `ERROR(<category>):` prefix. Exit codes: 0 success,
//! 1 usage, 2 data/domain error, 3 numeric error.

use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use cumulant_outliers::error::ErrorCategory;
use cumulant_outliers::{
    c4_beta_sweep, central_moment, cumulants_upto_4, hosvd_c4_detect, io as fmt,
    log_increments, make_experiment, roc_curve, run_experiment, rx_detect, rx_quantile_sweep,
    BetaGrid, DetectorChoice, ExperimentConfig, MutualInfoReport, RxThreshold, SeedSpec,
};

#[derive(Parser)]
#[command(
    name = "cumout",
    version,
    about = "Cross-correlated extreme-event detection with fourth-order cumulant tensors"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Seed for randomized subcommands (`gen`)
    #[arg(long, global = true, default_value_t = 1)]
    seed: u64,

    /// Output location: a directory for `gen`, a file otherwise
    /// (stdout when omitted)
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Worker threads for parallel sections (0 = all cores)
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a labeled synthetic dataset (data.csv, labels.csv, meta.json)
    Gen(GenArgs),
    /// Run one detector on a data CSV and print the result as JSON
    Detect {
        #[command(subcommand)]
        detector: DetectCommand,
    },
    /// Sweep a detector over a grid and write a ROC CSV (beta,fpr,tpr + auc footer)
    Roc(RocArgs),
    /// Multi-seed experiment with a seed-aggregated JSON report
    Experiment(ExperimentArgs),
    /// Cumulant tensor of a data CSV as JSON
    Cumulants(CumulantsArgs),
    /// Mutual-information split of a t-Student copula
    Mi(MiArgs),
    /// Convert a price CSV into a log-increment CSV
    Ingest(IngestArgs),
}

#[derive(Args)]
struct GenArgs {
    #[arg(long, default_value_t = 1000)]
    t: usize,
    #[arg(long, default_value_t = 100)]
    tau: usize,
    #[arg(long, default_value_t = 30)]
    n: usize,
    #[arg(long = "nu-c", default_value_t = 6)]
    nu_c: u64,
    #[arg(long = "nu-u", default_value_t = 6.0)]
    nu_u: f64,
}

#[derive(Subcommand)]
enum DetectCommand {
    /// Iterative fourth-cumulant detector
    C4 {
        /// Data CSV (header row, one realisation per line)
        #[arg(long)]
        data: PathBuf,
        /// Sensitivity threshold in MAD units
        #[arg(long, default_value_t = 2.5)]
        beta: f64,
        /// Number of projection directions
        #[arg(long, default_value_t = 3)]
        r: usize,
    },
    /// RX (Mahalanobis) detector
    Rx {
        #[arg(long)]
        data: PathBuf,
        /// χ² percentile for the threshold (Gaussian-background calibration)
        #[arg(long, conflicts_with = "threshold")]
        percentile: Option<f64>,
        /// Raw threshold on the Mahalanobis squared distance
        #[arg(long)]
        threshold: Option<f64>,
    },
}

#[derive(Args)]
struct RocArgs {
    #[arg(long)]
    data: PathBuf,
    /// Label CSV: one 0/1 line per data row
    #[arg(long)]
    labels: PathBuf,
    /// Detector to sweep
    #[arg(long, default_value = "c4", value_parser = ["c4", "rx"])]
    detector: String,
    #[arg(long, default_value_t = 3)]
    r: usize,
    /// β grid as start:stop:step
    #[arg(long, default_value = "1.0:5.0:0.25")]
    grid: String,
}

#[derive(Args)]
struct ExperimentArgs {
    /// JSON config file mirroring the experiment flags
    #[arg(long, conflicts_with_all = ["t", "tau", "n", "nu_c", "nu_u", "r", "grid", "seeds", "seed_list", "detectors"])]
    config: Option<PathBuf>,
    #[arg(long)]
    t: Option<usize>,
    #[arg(long)]
    tau: Option<usize>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long = "nu-c")]
    nu_c: Option<u64>,
    #[arg(long = "nu-u")]
    nu_u: Option<f64>,
    #[arg(long)]
    r: Option<usize>,
    /// β grid as start:stop:step
    #[arg(long)]
    grid: Option<String>,
    /// Number of seeds (runs seeds 1..=N)
    #[arg(long, conflicts_with = "seed_list")]
    seeds: Option<usize>,
    /// Explicit comma-separated seed list
    #[arg(long = "seed-list")]
    seed_list: Option<String>,
    /// Detectors to run: c4, rx, or both
    #[arg(long, value_parser = ["c4", "rx", "both"])]
    detectors: Option<String>,
}

#[derive(Args)]
struct CumulantsArgs {
    #[arg(long)]
    data: PathBuf,
    /// Cumulant order
    #[arg(long, value_parser = clap::value_parser!(u8).range(2..=4))]
    order: u8,
}

#[derive(Args)]
struct MiArgs {
    /// Copula degrees of freedom ν_c
    #[arg(long)]
    nu: f64,
    /// Number of marginals (defaults to the Σ dimension when --sigma is given)
    #[arg(long)]
    n: Option<usize>,
    /// Headerless CSV with a unit-diagonal correlation matrix
    #[arg(long)]
    sigma: Option<PathBuf>,
}

#[derive(Args)]
struct IngestArgs {
    /// Price CSV: header `timestamp,asset…`, strictly time-ordered rows
    #[arg(long)]
    prices: PathBuf,
}

enum CliError {
    Usage(String),
    Core(cumulant_outliers::Error),
}

impl From<cumulant_outliers::Error> for CliError {
    fn from(e: cumulant_outliers::Error) -> Self {
        CliError::Core(e)
    }
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return ExitCode::SUCCESS;
            }
            eprintln!("ERROR(usage): invalid command line");
            eprint!("{e}");
            return ExitCode::from(1);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(msg)) => {
            eprintln!("ERROR(usage): {msg}");
            ExitCode::from(1)
        }
        Err(CliError::Core(e)) => {
            let category = e.category();
            eprintln!("ERROR({}): {e}", category.as_str());
            match category {
                ErrorCategory::Data | ErrorCategory::Domain => ExitCode::from(2),
                ErrorCategory::Numeric => ExitCode::from(3),
            }
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    if cli.threads > 0 {
        // ignore the error if a global pool already exists
        let _ = rayon_global_threads(cli.threads);
    }
    match cli.command {
        Command::Gen(args) => cmd_gen(args, cli.seed, cli.out.as_deref()),
        Command::Detect { detector } => cmd_detect(detector, cli.out.as_deref()),
        Command::Roc(args) => cmd_roc(args, cli.out.as_deref()),
        Command::Experiment(args) => cmd_experiment(args, cli.out.as_deref()),
        Command::Cumulants(args) => cmd_cumulants(args, cli.out.as_deref()),
        Command::Mi(args) => cmd_mi(args, cli.out.as_deref()),
        Command::Ingest(args) => cmd_ingest(args, cli.out.as_deref()),
    }
}

fn rayon_global_threads(threads: usize) -> Result<(), CliError> {
    cumulant_outliers::configure_threads(threads)
        .map_err(|e| usage(format!("could not configure {threads} threads: {e}")))
}

/// Write `payload` to `--out` or stdout.
fn emit(out: Option<&Path>, payload: &[u8]) -> Result<(), CliError> {
    match out {
        Some(path) => {
            let mut f = File::create(path).map_err(cumulant_outliers::Error::from)?;
            f.write_all(payload).map_err(cumulant_outliers::Error::from)?;
        }
        None => {
            std::io::stdout()
                .write_all(payload)
                .map_err(cumulant_outliers::Error::from)?;
        }
    }
    Ok(())
}

fn emit_json(out: Option<&Path>, value: &serde_json::Value) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).map_err(cumulant_outliers::Error::from)?;
    text.push('\n');
    emit(out, text.as_bytes())
}

fn cmd_gen(args: GenArgs, seed: u64, out: Option<&Path>) -> Result<(), CliError> {
    let ds = make_experiment(args.t, args.tau, args.n, args.nu_c, args.nu_u, seed)?;
    let dir = out.unwrap_or(Path::new("."));
    fmt::write_dataset(dir, &ds)?;
    eprintln!(
        "wrote {}, {}, {}",
        dir.join("data.csv").display(),
        dir.join("labels.csv").display(),
        dir.join("meta.json").display()
    );
    Ok(())
}

fn read_data(path: &Path) -> Result<cumulant_outliers::DataMatrix, CliError> {
    Ok(fmt::read_data_csv(File::open(path).map_err(cumulant_outliers::Error::from)?)?)
}

fn cmd_detect(cmd: DetectCommand, out: Option<&Path>) -> Result<(), CliError> {
    match cmd {
        DetectCommand::C4 { data, beta, r } => {
            let x = read_data(&data)?;
            let result = hosvd_c4_detect(&x, beta, r)?;
            let value = serde_json::to_value(&result).map_err(cumulant_outliers::Error::from)?;
            emit_json(out, &value)
        }
        DetectCommand::Rx {
            data,
            percentile,
            threshold,
        } => {
            let x = read_data(&data)?;
            let thr = match (percentile, threshold) {
                (Some(p), None) => RxThreshold::Chi2Percentile(p),
                (None, Some(v)) => RxThreshold::Raw(v),
                _ => return Err(usage("rx needs exactly one of --percentile or --threshold")),
            };
            let flagged = rx_detect(&x, thr)?;
            let value = match thr {
                RxThreshold::Chi2Percentile(p) => json!({
                    "flagged": flagged,
                    "percentile": p,
                    "threshold": cumulant_outliers::chi2_quantile(p, x.n() as u64)?,
                }),
                RxThreshold::Raw(v) => json!({ "flagged": flagged, "threshold": v }),
            };
            emit_json(out, &value)
        }
    }
}

fn parse_grid(text: &str) -> Result<BetaGrid, CliError> {
    let parts: Vec<&str> = text.split(':').collect();
    if parts.len() != 3 {
        return Err(usage(format!("grid {text:?} is not start:stop:step")));
    }
    let parse = |s: &str| -> Result<f64, CliError> {
        s.parse()
            .map_err(|_| usage(format!("grid component {s:?} is not a number")))
    };
    Ok(BetaGrid {
        start: parse(parts[0])?,
        stop: parse(parts[1])?,
        step: parse(parts[2])?,
    })
}

fn cmd_roc(args: RocArgs, out: Option<&Path>) -> Result<(), CliError> {
    let x = read_data(&args.data)?;
    let labels =
        fmt::read_labels_csv(File::open(&args.labels).map_err(cumulant_outliers::Error::from)?)?;
    let grid = parse_grid(&args.grid)?;
    let betas = grid.values()?;
    let sweep = match args.detector.as_str() {
        "c4" => c4_beta_sweep(&x, &betas, args.r)?,
        _ => rx_quantile_sweep(&x, betas.len())?,
    };
    let curve = roc_curve(&sweep, &labels)?;
    let mut buf = Vec::new();
    fmt::write_roc_csv(&mut buf, &curve)?;
    emit(out, &buf)
}

fn cmd_experiment(args: ExperimentArgs, out: Option<&Path>) -> Result<(), CliError> {
    let config = match args.config {
        Some(path) => {
            let file = File::open(&path).map_err(cumulant_outliers::Error::from)?;
            serde_json::from_reader::<_, ExperimentConfig>(file)
                .map_err(cumulant_outliers::Error::from)?
        }
        None => {
            let mut cfg = ExperimentConfig::default();
            if let Some(t) = args.t {
                cfg.t = t;
            }
            if let Some(tau) = args.tau {
                cfg.tau = tau;
            }
            if let Some(n) = args.n {
                cfg.n = n;
            }
            if let Some(nu_c) = args.nu_c {
                cfg.nu_c = nu_c;
            }
            if let Some(nu_u) = args.nu_u {
                cfg.nu_u = nu_u;
            }
            if let Some(r) = args.r {
                cfg.r = r;
            }
            if let Some(grid) = args.grid.as_deref() {
                cfg.beta_grid = parse_grid(grid)?;
            }
            if let Some(count) = args.seeds {
                cfg.seeds = SeedSpec::Count(count);
            } else if let Some(list) = args.seed_list.as_deref() {
                let seeds: Result<Vec<u64>, _> =
                    list.split(',').map(|s| s.trim().parse::<u64>()).collect();
                cfg.seeds = SeedSpec::List(
                    seeds.map_err(|_| usage(format!("bad seed list {list:?}")))?,
                );
            }
            if let Some(d) = args.detectors.as_deref() {
                cfg.detectors = match d {
                    "c4" => DetectorChoice::C4,
                    "rx" => DetectorChoice::Rx,
                    _ => DetectorChoice::Both,
                };
            }
            cfg
        }
    };
    let report = run_experiment(&config)?;
    let value = serde_json::to_value(&report).map_err(cumulant_outliers::Error::from)?;
    emit_json(out, &value)
}

fn cmd_cumulants(args: CumulantsArgs, out: Option<&Path>) -> Result<(), CliError> {
    let x = read_data(&args.data)?;
    let tensor = match args.order {
        2 | 3 => central_moment(&x, args.order as usize)?,
        _ => cumulants_upto_4(&x)?.2,
    };
    emit_json(out, &fmt::tensor_to_json(&tensor))
}

fn cmd_mi(args: MiArgs, out: Option<&Path>) -> Result<(), CliError> {
    let sigma = match args.sigma.as_deref() {
        Some(path) => Some(read_square_matrix(path)?),
        None => None,
    };
    let n = match (args.n, sigma.as_ref()) {
        (Some(n), _) => n,
        (None, Some(m)) => m.nrows(),
        (None, None) => return Err(usage("mi needs --n or --sigma")),
    };
    let report = MutualInfoReport::compute(sigma.as_ref(), args.nu, n)?;
    let value = serde_json::to_value(report).map_err(cumulant_outliers::Error::from)?;
    emit_json(out, &value)
}

fn read_square_matrix(path: &Path) -> Result<nalgebra::DMatrix<f64>, CliError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .from_reader(File::open(path).map_err(cumulant_outliers::Error::from)?);
    let mut values = Vec::new();
    let mut rows = 0usize;
    let mut cols = None;
    for record in reader.records() {
        let record = record.map_err(cumulant_outliers::Error::from)?;
        let row: Result<Vec<f64>, _> = record.iter().map(|f| f.trim().parse::<f64>()).collect();
        let row = row.map_err(|_| {
            CliError::Core(cumulant_outliers::error::Error::Data(format!(
                "unparsable matrix row {}",
                rows + 1
            )))
        })?;
        if *cols.get_or_insert(row.len()) != row.len() {
            return Err(CliError::Core(cumulant_outliers::error::Error::Data(
                "matrix rows have inconsistent lengths".into(),
            )));
        }
        values.extend(row);
        rows += 1;
    }
    let cols = cols.unwrap_or(0);
    if rows == 0 || rows != cols {
        return Err(CliError::Core(cumulant_outliers::error::Error::Data(
            format!("matrix must be square and non-empty, got {rows}x{cols}"),
        )));
    }
    Ok(nalgebra::DMatrix::from_row_slice(rows, cols, &values))
}

fn cmd_ingest(args: IngestArgs, out: Option<&Path>) -> Result<(), CliError> {
    let series = cumulant_outliers::ingest_prices(
        File::open(&args.prices).map_err(cumulant_outliers::Error::from)?,
    )?;
    let increments = log_increments(&series)?;
    let mut buf = Vec::new();
    fmt::write_data_csv_with_header(&mut buf, &increments, series.assets())?;
    emit(out, &buf)
}
