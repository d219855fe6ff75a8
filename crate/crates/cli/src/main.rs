//! `zz`: data generation, sampling, diagnostics and experiment suites.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use zigzag_core::data::{
    generate_seeded, load_csv, write_csv, CsvOptions, Density, MissingPolicy, ResponseMode, Scaling, SynthSpec,
};
use zigzag_core::diagnostics::{batch_means, integrate_moments, mixing_report, BatchMeans, MixingReport, DEFAULT_SAMPLES};
use zigzag_core::experiment::{build_scheme, derive_seed, run_experiment, DataSource, ExperimentConfig};
use zigzag_core::mode::{posterior_mode, ModeOptions};
use zigzag_core::{run, Error, Precondition, PriorSpec, RecordMode, RunConfig, SchemeSpec, Skeleton, ZigZagState};

const EXIT_CONFIG: u8 = 2;
const EXIT_INVARIANT: u8 = 3;

#[derive(Parser)]
#[command(name = "zz", version, about = "Zig-zag sampling for sparse logistic regression")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset as CSV.
    Gen(GenArgs),
    /// Load a CSV and print its ingestion report.
    Ingest(IngestArgs),
    /// Run the sampler once and write the skeleton and a summary.
    Sample(SampleArgs),
    /// Summarize a recorded skeleton.
    Diag(DiagArgs),
    /// Run an experiment suite from a JSON config.
    Experiment(ExperimentArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum DensityArg {
    Normal,
    Laplace,
}

#[derive(Clone, Copy, ValueEnum)]
enum MissingArg {
    Median,
    Indicator,
}

#[derive(Clone, Copy, ValueEnum)]
enum ScalingArg {
    None,
    UnitMaxAbs,
}

#[derive(Args)]
struct CsvArgs {
    /// Column holding the 0/1 response.
    #[arg(long, default_value = "y")]
    response: String,
    /// Append an all-ones column.
    #[arg(long)]
    intercept: bool,
    #[arg(long, value_enum, default_value = "median")]
    missing: MissingArg,
    #[arg(long, value_enum, default_value = "none")]
    scaling: ScalingArg,
}

impl CsvArgs {
    fn options(&self) -> CsvOptions {
        CsvOptions {
            missing: match self.missing {
                MissingArg::Median => MissingPolicy::Median,
                MissingArg::Indicator => MissingPolicy::MedianWithIndicator,
            },
            scaling: match self.scaling {
                ScalingArg::None => Scaling::None,
                ScalingArg::UnitMaxAbs => Scaling::UnitMaxAbs,
            },
            intercept: self.intercept,
        }
    }
}

#[derive(Args)]
struct GenArgs {
    /// JSON synthetic-data spec; flags below are ignored when given.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value_t = 1000)]
    n: usize,
    #[arg(long, default_value_t = 5)]
    p: usize,
    /// Probability that a covariate is nonzero.
    #[arg(long, default_value_t = 1.0)]
    sparsity: f64,
    #[arg(long, value_enum, default_value = "normal")]
    density: DensityArg,
    /// Exactly this many responses are one, independent of the covariates.
    #[arg(long)]
    ones: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct IngestArgs {
    #[arg(long)]
    data: PathBuf,
    #[command(flatten)]
    csv: CsvArgs,
    /// Write the report here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Fully resolved sampler run; written next to the outputs so that
/// `zz sample --config <out>/config.json` replays it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SampleConfig {
    #[serde(default = "default_source")]
    data: DataSource,
    #[serde(default = "default_scheme")]
    scheme: SchemeSpec,
    #[serde(default = "default_prior")]
    prior: PriorSpec,
    #[serde(default = "default_attempts")]
    attempts: u64,
    #[serde(default)]
    seed: u64,
    #[serde(default)]
    precondition: Precondition,
    #[serde(default)]
    record_mode: RecordMode,
    #[serde(default = "default_samples")]
    samples: usize,
}

fn default_source() -> DataSource {
    DataSource::Synthetic {
        spec: SynthSpec::new(1000, 5, 1.0, Density::Normal),
    }
}
fn default_scheme() -> SchemeSpec {
    "uniform".parse().expect("valid literal")
}
fn default_prior() -> PriorSpec {
    PriorSpec::Gaussian { variance: 1.0 }
}
fn default_attempts() -> u64 {
    100_000
}
fn default_samples() -> usize {
    DEFAULT_SAMPLES
}

#[derive(Args)]
struct SampleArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    /// CSV dataset; a seeded synthetic dataset is used when absent.
    #[arg(long)]
    data: Option<PathBuf>,
    #[command(flatten)]
    csv: CsvArgs,
    /// `{uniform|importance|stratified}[,cv][,m=<int>]`
    #[arg(long)]
    scheme: Option<SchemeSpec>,
    /// `gaussian:<var>|cauchy:<s>|gdp:<a>,<t>|laplace:<b>`
    #[arg(long)]
    prior: Option<PriorSpec>,
    #[arg(long)]
    attempts: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    /// `off|adaptive:<every>,<freeze>`
    #[arg(long)]
    precondition: Option<Precondition>,
    /// `flips_only|full_state`
    #[arg(long)]
    record_mode: Option<RecordMode>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct DiagArgs {
    /// Skeleton JSON written by `sample`.
    #[arg(long)]
    skeleton: PathBuf,
    #[arg(long, default_value_t = DEFAULT_SAMPLES)]
    samples: usize,
    #[arg(long, default_value_t = 20)]
    batches: usize,
    /// Write the report here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ExperimentArgs {
    #[arg(long)]
    config: PathBuf,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the attempt budget of every run.
    #[arg(long)]
    attempts: Option<u64>,
    /// Worker threads; all cores by default.
    #[arg(long)]
    jobs: Option<usize>,
    /// Overrides the config output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Serialize)]
struct SampleSummary<'a> {
    scheme: String,
    prior: String,
    start_time: f64,
    end_time: f64,
    stats: &'a zigzag_core::zigzag::RunStats,
    final_speeds: &'a [f64],
    mean: Vec<f64>,
    variance: Vec<f64>,
    mixing: MixingReport,
}

#[derive(Serialize)]
struct DiagReport {
    p: usize,
    start_time: f64,
    end_time: f64,
    flips: usize,
    /// False when some dimension never flips, so its IACT is undefined.
    iact_defined: bool,
    mean: Vec<f64>,
    variance: Vec<f64>,
    batch_means: Option<BatchMeans>,
    mixing: MixingReport,
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, Error> {
    let text = fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), Error> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    fs::write(path, s)?;
    Ok(())
}

fn emit_json<T: Serialize>(out: Option<&Path>, value: &T) -> Result<(), Error> {
    match out {
        Some(p) => write_json(p, value),
        None => {
            println!("{}", serde_json::to_string_pretty(value)?);
            Ok(())
        }
    }
}

fn cmd_gen(args: GenArgs) -> Result<(), Error> {
    let spec = match &args.config {
        Some(path) => read_json(path)?,
        None => {
            let density = match args.density {
                DensityArg::Normal => Density::Normal,
                DensityArg::Laplace => Density::Laplace,
            };
            let mut spec = SynthSpec::new(args.n, args.p, args.sparsity, density);
            if let Some(k) = args.ones {
                spec = spec.with_responses(ResponseMode::FixedOnes { k });
            }
            spec
        }
    };
    spec.validate()?;
    let data = generate_seeded(&spec, args.seed)?;
    write_csv(&data, &args.out)?;
    log::info!("wrote n={} p={} nnz={} to {}", data.n(), data.p(), data.nnz(), args.out.display());
    Ok(())
}

fn cmd_ingest(args: IngestArgs) -> Result<(), Error> {
    let (_, report) = load_csv(&args.data, &args.csv.response, &args.csv.options())?;
    emit_json(args.out.as_deref(), &report)
}

fn resolve_sample(args: &SampleArgs) -> Result<SampleConfig, Error> {
    let mut cfg: SampleConfig = match &args.config {
        Some(path) => read_json(path)?,
        None => serde_json::from_str("{}")?,
    };
    if let Some(path) = &args.data {
        cfg.data = DataSource::Csv {
            path: path.clone(),
            response: args.csv.response.clone(),
            options: args.csv.options(),
        };
    }
    if let Some(s) = args.scheme {
        cfg.scheme = s;
    }
    if let Some(p) = args.prior {
        cfg.prior = p;
    }
    if let Some(a) = args.attempts {
        cfg.attempts = a;
    }
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if let Some(p) = args.precondition {
        cfg.precondition = p;
    }
    if let Some(r) = args.record_mode {
        cfg.record_mode = r;
    }
    cfg.scheme.validate()?;
    cfg.prior = cfg.prior.validated()?;
    RunConfig::new(cfg.attempts, cfg.seed)
        .with_precondition(cfg.precondition)
        .validate()?;
    Ok(cfg)
}

fn cmd_sample(args: SampleArgs) -> Result<(), Error> {
    let cfg = resolve_sample(&args)?;
    let data = match &cfg.data {
        DataSource::Csv { path, response, options } => {
            let (data, report) = load_csv(path, response, options)?;
            fs::create_dir_all(&args.out)?;
            write_json(&args.out.join("ingest.json"), &report)?;
            data
        }
        source => source.load(derive_seed(cfg.seed, 0, 0))?,
    };
    let mode = posterior_mode(&data, &cfg.prior, ModeOptions::default())?;
    let scheme = build_scheme(&data, &cfg.prior, cfg.scheme, Some(&mode))?;
    let run_cfg = RunConfig::new(cfg.attempts, derive_seed(cfg.seed, 0, 1))
        .with_precondition(cfg.precondition)
        .with_record_mode(cfg.record_mode);
    log::info!("sampling n={} p={} scheme={} prior={}", data.n(), data.p(), cfg.scheme, cfg.prior);
    let sk = run(&data, &cfg.prior, &scheme, &run_cfg, ZigZagState::at(mode))?;
    log::info!("{} flips over simulated time {}", sk.stats.flips, sk.end_time());

    let estimation = match sk.stats.frozen_at {
        Some(_) => sk.frozen_tail()?,
        None => sk.clone(),
    };
    let moments = integrate_moments(&estimation);
    let summary = SampleSummary {
        scheme: cfg.scheme.to_string(),
        prior: cfg.prior.to_string(),
        start_time: sk.start_time(),
        end_time: sk.end_time(),
        stats: &sk.stats,
        final_speeds: &sk.final_state.alpha,
        mean: moments.mean(),
        variance: moments.variance(),
        mixing: mixing_report(&estimation, cfg.samples)?,
    };
    fs::create_dir_all(&args.out)?;
    write_json(&args.out.join("config.json"), &cfg)?;
    write_json(&args.out.join("skeleton.json"), &sk)?;
    write_json(&args.out.join("summary.json"), &summary)?;
    Ok(())
}

fn cmd_diag(args: DiagArgs) -> Result<(), Error> {
    let sk: Skeleton = read_json(&args.skeleton)?;
    let moments = integrate_moments(&sk);
    let mixing = mixing_report(&sk, args.samples)?;
    let iact_defined = mixing.iact.iter().all(Option::is_some);
    if !iact_defined {
        log::warn!("iact undefined: at least one dimension never flips");
    }
    let report = DiagReport {
        p: sk.p(),
        start_time: sk.start_time(),
        end_time: sk.end_time(),
        flips: sk.flip_count(),
        iact_defined,
        mean: moments.mean(),
        variance: moments.variance(),
        batch_means: batch_means(&sk, args.batches).ok(),
        mixing,
    };
    emit_json(args.out.as_deref(), &report)
}

fn cmd_experiment(args: ExperimentArgs) -> Result<(), Error> {
    let text = fs::read_to_string(&args.config)?;
    let mut cfg = ExperimentConfig::from_json(&text)?;
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if let Some(a) = args.attempts {
        cfg.set_attempts(a);
    }
    let out = args
        .out
        .clone()
        .or_else(|| cfg.out_dir.clone())
        .ok_or_else(|| Error::Config("no output directory: pass --out or set out_dir".into()))?;
    // The manifest records the config as run, minus where it was written.
    cfg.out_dir = None;
    log::info!("running {} with {} replicates", cfg.name(), cfg.replicates);
    let result = run_experiment(&cfg, args.jobs)?;
    result.write(&out)?;
    log::info!("wrote {} tables to {}", result.tables.len(), out.display());
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("ZZ_LOG", "warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Gen(a) => cmd_gen(a),
        Command::Ingest(a) => cmd_ingest(a),
        Command::Sample(a) => cmd_sample(a),
        Command::Diag(a) => cmd_diag(a),
        Command::Experiment(a) => cmd_experiment(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_invariant_violation() {
                ExitCode::from(EXIT_INVARIANT)
            } else {
                ExitCode::from(EXIT_CONFIG)
            }
        }
    }
}
