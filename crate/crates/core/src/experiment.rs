//! Seeded experiment suites producing long-form CSV tables and a JSON manifest.
//!
//! Every run's seed is derived from the suite seed, the replicate index and a
//! run label, so a manifest replays to byte-identical tables regardless of how
//! many worker threads execute it.

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{generate_seeded, load_csv, CsvOptions, Density, ResponseMode, SynthSpec};
use crate::diagnostics::{autocorrelation, discretize, gain_ratios, mixing_report, mixing_report_from, MixingReport};
use crate::error::{Error, Result};
use crate::mode::{posterior_mode, ModeOptions};
use crate::model::{Dataset, PriorSpec};
use crate::subsample::{SchemeSpec, SubsamplingScheme};
use crate::zigzag::{run, Precondition, RunConfig, Skeleton, ZigZagState};

/// SplitMix64 finalizer.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed for `(replicate, slot)` of a suite.
pub fn derive_seed(seed: u64, replicate: u64, slot: u64) -> u64 {
    splitmix64(splitmix64(splitmix64(seed) ^ replicate) ^ slot.wrapping_mul(0xD6E8_FEB8_6659_FD93))
}

/// Where a dataset comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "source")]
pub enum DataSource {
    Synthetic { spec: SynthSpec },
    Csv {
        path: PathBuf,
        response: String,
        #[serde(default)]
        options: CsvOptions,
    },
    /// Synthetic stand-in shaped like a small, very imbalanced, sparse clinical
    /// table: n = 858, p = 34, 18 positives, 80% zeros per column.
    ImbalancedSurrogate,
}

impl DataSource {
    /// `seed` is ignored for CSV sources.
    pub fn load(&self, seed: u64) -> Result<Dataset> {
        match self {
            DataSource::Synthetic { spec } => generate_seeded(spec, seed),
            DataSource::Csv { path, response, options } => Ok(load_csv(path, response, options)?.0),
            DataSource::ImbalancedSurrogate => generate_seeded(&imbalanced_surrogate(), seed),
        }
    }

    pub fn is_random(&self) -> bool {
        !matches!(self, DataSource::Csv { .. })
    }
}

pub fn imbalanced_surrogate() -> SynthSpec {
    SynthSpec::new(858, 34, 0.2, Density::Laplace).with_responses(ResponseMode::FixedOnes { k: 18 })
}

fn default_replicates() -> usize {
    10
}
fn default_attempts() -> u64 {
    100_000
}
fn default_burn_in() -> f64 {
    0.1
}
fn default_samples() -> usize {
    crate::diagnostics::DEFAULT_SAMPLES
}
fn default_uniform() -> SchemeSpec {
    "uniform".parse().expect("valid literal")
}
fn default_importance() -> SchemeSpec {
    "importance".parse().expect("valid literal")
}
fn default_unit_prior() -> PriorSpec {
    PriorSpec::Gaussian { variance: 1.0 }
}
fn default_flat_prior() -> PriorSpec {
    PriorSpec::Gaussian { variance: 1e10 }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "experiment")]
pub enum Experiment {
    /// Simulated-time gain of `variant` over `baseline` as the covariates get sparser.
    ScalingAlpha {
        n: usize,
        p: usize,
        alphas: Vec<f64>,
        #[serde(default = "default_density_normal")]
        density: Density,
        #[serde(default = "default_flat_prior")]
        prior: PriorSpec,
        #[serde(default = "default_attempts")]
        attempts: u64,
        #[serde(default = "default_uniform")]
        baseline: SchemeSpec,
        #[serde(default = "default_importance")]
        variant: SchemeSpec,
    },
    /// Same gain for dense covariates as `n` grows.
    ScalingN {
        ns: Vec<usize>,
        p: usize,
        #[serde(default = "default_density_normal")]
        density: Density,
        #[serde(default = "default_flat_prior")]
        prior: PriorSpec,
        #[serde(default = "default_attempts")]
        attempts: u64,
        #[serde(default = "default_uniform")]
        baseline: SchemeSpec,
        #[serde(default = "default_importance")]
        variant: SchemeSpec,
    },
    /// Mixing-time ratio (with / without control variates) as the number of ones `k` shrinks.
    CvImbalance {
        n: usize,
        p: usize,
        sparsity: f64,
        ks: Vec<usize>,
        #[serde(default = "default_density_laplace")]
        density: Density,
        /// Append an all-ones column to each dataset.
        #[serde(default)]
        intercept: bool,
        #[serde(default = "default_unit_prior")]
        prior: PriorSpec,
        #[serde(default = "default_attempts")]
        attempts: u64,
        #[serde(default = "default_burn_in")]
        burn_in: f64,
        #[serde(default = "default_samples")]
        samples: usize,
    },
    /// Importance sub-sampling with and without adaptive preconditioning.
    Highdim {
        n: usize,
        p: usize,
        sparsity: f64,
        #[serde(default = "default_density_normal")]
        density: Density,
        #[serde(default = "default_unit_prior")]
        prior: PriorSpec,
        #[serde(default = "default_attempts")]
        attempts: u64,
        update_every: u64,
        freeze_after: u64,
        #[serde(default = "default_burn_in")]
        burn_in: f64,
        #[serde(default = "default_samples")]
        samples: usize,
        #[serde(default = "default_lags")]
        lags: Vec<usize>,
    },
    /// Median mixing time of several schemes on one data source.
    SchemeComparison {
        data: DataSource,
        schemes: Vec<SchemeSpec>,
        #[serde(default = "default_unit_prior")]
        prior: PriorSpec,
        #[serde(default = "default_attempts")]
        attempts: u64,
        #[serde(default = "default_burn_in")]
        burn_in: f64,
        #[serde(default = "default_samples")]
        samples: usize,
    },
    /// One scheme, one configuration; reports moments and mixing.
    SingleRun {
        data: DataSource,
        scheme: SchemeSpec,
        #[serde(default = "default_unit_prior")]
        prior: PriorSpec,
        #[serde(default = "default_attempts")]
        attempts: u64,
        #[serde(default)]
        precondition: Precondition,
        #[serde(default = "default_burn_in")]
        burn_in: f64,
        #[serde(default = "default_samples")]
        samples: usize,
    },
}

fn default_density_normal() -> Density {
    Density::Normal
}
fn default_density_laplace() -> Density {
    Density::Laplace
}
fn default_lags() -> Vec<usize> {
    vec![1, 2, 5, 10, 20, 50, 100]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    #[serde(flatten)]
    pub experiment: Experiment,
    #[serde(default = "default_replicates")]
    pub replicates: usize,
    #[serde(default)]
    pub seed: u64,
    /// Output directory; the CLI `--out` flag takes precedence.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn new(experiment: Experiment, replicates: usize, seed: u64) -> Self {
        ExperimentConfig {
            experiment,
            replicates,
            seed,
            out_dir: None,
        }
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(s).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.replicates == 0 {
            return Err(Error::config("replicates must be at least 1"));
        }
        let prior = match &self.experiment {
            Experiment::ScalingAlpha { prior, alphas, n, p, .. } => {
                if alphas.is_empty() {
                    return Err(Error::config("alphas must be nonempty"));
                }
                for &a in alphas {
                    SynthSpec::new(*n, *p, a, Density::Normal).validate()?;
                }
                prior
            }
            Experiment::ScalingN { prior, ns, p, .. } => {
                if ns.is_empty() || ns.contains(&0) || *p == 0 {
                    return Err(Error::config("ns must be nonempty and positive"));
                }
                prior
            }
            Experiment::CvImbalance { prior, ks, n, p, sparsity, burn_in, .. } => {
                for &k in ks {
                    SynthSpec::new(*n, *p, *sparsity, Density::Laplace)
                        .with_responses(ResponseMode::FixedOnes { k })
                        .validate()?;
                }
                check_burn_in(*burn_in)?;
                prior
            }
            Experiment::Highdim {
                prior,
                n,
                p,
                sparsity,
                attempts,
                update_every,
                freeze_after,
                burn_in,
                ..
            } => {
                SynthSpec::new(*n, *p, *sparsity, Density::Normal).validate()?;
                RunConfig::new(*attempts, 0)
                    .with_precondition(Precondition::Adaptive {
                        update_every: *update_every,
                        freeze_after: *freeze_after,
                    })
                    .validate()?;
                check_burn_in(*burn_in)?;
                prior
            }
            Experiment::SchemeComparison { prior, schemes, burn_in, .. } => {
                if schemes.is_empty() {
                    return Err(Error::config("schemes must be nonempty"));
                }
                check_burn_in(*burn_in)?;
                prior
            }
            Experiment::SingleRun {
                prior,
                attempts,
                precondition,
                burn_in,
                ..
            } => {
                RunConfig::new(*attempts, 0).with_precondition(*precondition).validate()?;
                check_burn_in(*burn_in)?;
                prior
            }
        };
        prior.validated().map(|_| ()).map_err(|e| Error::Config(e.to_string()))
    }

    /// Overrides the attempt budget of every run in the suite.
    pub fn set_attempts(&mut self, n: u64) {
        match &mut self.experiment {
            Experiment::ScalingAlpha { attempts, .. }
            | Experiment::ScalingN { attempts, .. }
            | Experiment::CvImbalance { attempts, .. }
            | Experiment::Highdim { attempts, .. }
            | Experiment::SchemeComparison { attempts, .. }
            | Experiment::SingleRun { attempts, .. } => *attempts = n,
        }
    }

    pub fn name(&self) -> &'static str {
        match self.experiment {
            Experiment::ScalingAlpha { .. } => "scaling_alpha",
            Experiment::ScalingN { .. } => "scaling_n",
            Experiment::CvImbalance { .. } => "cv_imbalance",
            Experiment::Highdim { .. } => "highdim",
            Experiment::SchemeComparison { .. } => "scheme_comparison",
            Experiment::SingleRun { .. } => "single_run",
        }
    }
}

fn check_burn_in(b: f64) -> Result<()> {
    if (0.0..1.0).contains(&b) {
        Ok(())
    } else {
        Err(Error::config(format!("burn-in fraction {b} outside [0, 1)")))
    }
}

/// Long-form table: one row per measurement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table {
    pub name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    fn new(name: &str, header: &[&str]) -> Self {
        Table {
            name: name.to_string(),
            header: header.iter().map(|h| h.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.header.join(",");
        out.push('\n');
        for r in &self.rows {
            out.push_str(&r.join(","));
            out.push('\n');
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub label: String,
    pub replicate: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub package: String,
    pub version: String,
    pub config: ExperimentConfig,
    pub runs: Vec<RunRecord>,
    pub tables: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentOutput {
    pub tables: Vec<Table>,
    pub manifest: Manifest,
}

impl ExperimentOutput {
    pub fn table(&self, name: &str) -> Option<&Table> {
        self.tables.iter().find(|t| t.name == name)
    }

    /// Writes `<name>.csv` per table and `manifest.json`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        for t in &self.tables {
            fs::write(dir.join(format!("{}.csv", t.name)), t.to_csv())?;
        }
        let mut json = serde_json::to_string_pretty(&self.manifest)?;
        json.push('\n');
        fs::write(dir.join("manifest.json"), json)?;
        Ok(())
    }
}

/// Runs with attempt budget and simulated-time result.
pub fn simulated_time(
    data: &Dataset,
    prior: &PriorSpec,
    spec: SchemeSpec,
    attempts: u64,
    seed: u64,
) -> Result<f64> {
    let reference = if spec.needs_reference() {
        Some(posterior_mode(data, prior, ModeOptions::default())?)
    } else {
        None
    };
    let scheme = SubsamplingScheme::build(data, spec, reference.as_deref())?;
    let init = ZigZagState::at(reference.unwrap_or_else(|| vec![0.0; data.p()]));
    let sk = run(data, prior, &scheme, &RunConfig::new(attempts, seed), init)?;
    Ok(sk.end_time())
}

/// Outcome of one mixing measurement.
#[derive(Debug, Clone, PartialEq)]
pub struct MixingRun {
    pub report: MixingReport,
    pub end_time: f64,
    pub flips: u64,
    pub final_alpha: Vec<f64>,
    pub skeleton: Skeleton,
}

/// Runs from `init` and summarizes mixing over the estimation phase: the frozen
/// tail for adaptive runs, otherwise everything after `burn_in · T`.
#[allow(clippy::too_many_arguments)]
pub fn measure_mixing(
    data: &Dataset,
    prior: &PriorSpec,
    scheme: &SubsamplingScheme,
    attempts: u64,
    seed: u64,
    precondition: Precondition,
    burn_in: f64,
    samples: usize,
    init: ZigZagState,
) -> Result<MixingRun> {
    let cfg = RunConfig::new(attempts, seed).with_precondition(precondition);
    let sk = run(data, prior, scheme, &cfg, init)?;
    let tail = match sk.stats.frozen_at {
        Some(_) => sk.frozen_tail()?,
        None => sk.tail_from(sk.start_time() + burn_in * (sk.end_time() - sk.start_time()))?,
    };
    let report = mixing_report(&tail, samples)?;
    Ok(MixingRun {
        report,
        end_time: sk.end_time(),
        flips: sk.stats.flips,
        final_alpha: sk.final_state.alpha.clone(),
        skeleton: tail,
    })
}

fn mean_sd(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let m = x.iter().sum::<f64>() / n;
    let sd = if x.len() > 1 {
        (x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    (m, sd)
}

pub fn median(x: &[f64]) -> f64 {
    let mut v = x.to_vec();
    v.sort_by(f64::total_cmp);
    let k = v.len() / 2;
    if v.len() % 2 == 1 {
        v[k]
    } else {
        0.5 * (v[k - 1] + v[k])
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "undefined".to_string(), |x| x.to_string())
}

/// Executes a suite on up to `jobs` threads (all cores when `None`).
pub fn run_experiment(config: &ExperimentConfig, jobs: Option<usize>) -> Result<ExperimentOutput> {
    config.validate()?;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(j) = jobs {
        builder = builder.num_threads(j.max(1));
    }
    let pool = builder.build().map_err(|e| Error::Config(e.to_string()))?;
    let (tables, runs) = pool.install(|| dispatch(config))?;
    let manifest = Manifest {
        package: env!("CARGO_PKG_NAME").to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        config: config.clone(),
        runs,
        tables: tables.iter().map(|t| format!("{}.csv", t.name)).collect(),
    };
    Ok(ExperimentOutput { tables, manifest })
}

type Suite = (Vec<Table>, Vec<RunRecord>);

fn dispatch(cfg: &ExperimentConfig) -> Result<Suite> {
    let reps = cfg.replicates;
    let seed = cfg.seed;
    match &cfg.experiment {
        Experiment::ScalingAlpha {
            n,
            p,
            alphas,
            density,
            prior,
            attempts,
            baseline,
            variant,
        } => {
            let grid: Vec<(f64, SynthSpec)> = alphas
                .iter()
                .map(|&a| (a, SynthSpec::new(*n, *p, a, *density)))
                .collect();
            gain_suite("alpha", &grid, prior, *attempts, *baseline, *variant, reps, seed)
        }
        Experiment::ScalingN {
            ns,
            p,
            density,
            prior,
            attempts,
            baseline,
            variant,
        } => {
            let grid: Vec<(f64, SynthSpec)> = ns
                .iter()
                .map(|&n| (n as f64, SynthSpec::new(n, *p, 1.0, *density)))
                .collect();
            gain_suite("n", &grid, prior, *attempts, *baseline, *variant, reps, seed)
        }
        Experiment::CvImbalance {
            n,
            p,
            sparsity,
            ks,
            density,
            intercept,
            prior,
            attempts,
            burn_in,
            samples,
        } => {
            let base = SynthSpec::new(*n, *p, *sparsity, *density).with_intercept(*intercept);
            cv_suite(&base, ks, prior, *attempts, *burn_in, *samples, reps, seed)
        }
        Experiment::Highdim {
            n,
            p,
            sparsity,
            density,
            prior,
            attempts,
            update_every,
            freeze_after,
            burn_in,
            samples,
            lags,
        } => {
            let spec = SynthSpec::new(*n, *p, *sparsity, *density);
            let pre = Precondition::Adaptive {
                update_every: *update_every,
                freeze_after: *freeze_after,
            };
            highdim_suite(&spec, prior, *attempts, pre, *burn_in, *samples, lags, reps, seed)
        }
        Experiment::SchemeComparison {
            data,
            schemes,
            prior,
            attempts,
            burn_in,
            samples,
        } => comparison_suite(data, schemes, prior, *attempts, *burn_in, *samples, reps, seed),
        Experiment::SingleRun {
            data,
            scheme,
            prior,
            attempts,
            precondition,
            burn_in,
            samples,
        } => single_suite(data, *scheme, prior, *attempts, *precondition, *burn_in, *samples, reps, seed),
    }
}

#[allow(clippy::too_many_arguments)]
fn gain_suite(
    param: &str,
    grid: &[(f64, SynthSpec)],
    prior: &PriorSpec,
    attempts: u64,
    baseline: SchemeSpec,
    variant: SchemeSpec,
    reps: usize,
    seed: u64,
) -> Result<Suite> {
    let tasks: Vec<(usize, usize)> = (0..grid.len()).flat_map(|g| (0..reps).map(move |r| (g, r))).collect();
    let results: Vec<(f64, f64, [u64; 3])> = tasks
        .par_iter()
        .map(|&(g, r)| {
            let rep = (g * reps + r) as u64;
            let seeds = [derive_seed(seed, rep, 0), derive_seed(seed, rep, 1), derive_seed(seed, rep, 2)];
            let data = generate_seeded(&grid[g].1, seeds[0])?;
            let tb = simulated_time(&data, prior, baseline, attempts, seeds[1])?;
            let tv = simulated_time(&data, prior, variant, attempts, seeds[2])?;
            Ok((tb, tv, seeds))
        })
        .collect::<Result<_>>()?;

    let mut runs_t = Table::new("runs", &[param, "replicate", "time_baseline", "time_variant", "ratio"]);
    let mut summary = Table::new("summary", &[param, "replicates", "mean_gain", "sd_gain"]);
    let mut records = Vec::new();
    for (g, (value, _)) in grid.iter().enumerate() {
        let chunk = &results[g * reps..(g + 1) * reps];
        let tb: Vec<f64> = chunk.iter().map(|c| c.0).collect();
        let tv: Vec<f64> = chunk.iter().map(|c| c.1).collect();
        let ratios = gain_ratios(&tb, &tv)?;
        for (r, c) in chunk.iter().enumerate() {
            runs_t.push(vec![value.to_string(), r.to_string(), c.0.to_string(), c.1.to_string(), ratios[r].to_string()]);
            for (label, s) in ["data", &baseline.to_string(), &variant.to_string()].iter().zip(c.2) {
                records.push(RunRecord {
                    label: format!("{param}={value}/{label}"),
                    replicate: r,
                    seed: s,
                });
            }
        }
        let (m, sd) = mean_sd(&ratios);
        summary.push(vec![value.to_string(), reps.to_string(), m.to_string(), sd.to_string()]);
    }
    Ok((vec![summary, runs_t], records))
}

/// Posterior mode, used as starting point and reference.
fn mode_of(data: &Dataset, prior: &PriorSpec) -> Result<Vec<f64>> {
    posterior_mode(data, prior, ModeOptions::default())
}

#[allow(clippy::too_many_arguments)]
fn cv_suite(
    base: &SynthSpec,
    ks: &[usize],
    prior: &PriorSpec,
    attempts: u64,
    burn_in: f64,
    samples: usize,
    reps: usize,
    seed: u64,
) -> Result<Suite> {
    let tasks: Vec<(usize, usize)> = (0..ks.len()).flat_map(|g| (0..reps).map(move |r| (g, r))).collect();
    let with_cv: SchemeSpec = "importance,cv".parse()?;
    let without: SchemeSpec = "importance".parse()?;
    let results: Vec<(Option<f64>, Option<f64>, [u64; 3])> = tasks
        .par_iter()
        .map(|&(g, r)| {
            let rep = (g * reps + r) as u64;
            let seeds = [derive_seed(seed, rep, 0), derive_seed(seed, rep, 1), derive_seed(seed, rep, 2)];
            let spec = base.clone().with_responses(ResponseMode::FixedOnes { k: ks[g] });
            let data = generate_seeded(&spec, seeds[0])?;
            let star = mode_of(&data, prior)?;
            let s_cv = SubsamplingScheme::build(&data, with_cv, Some(&star))?;
            let s_plain = SubsamplingScheme::build(&data, without, None)?;
            let init = ZigZagState::at(star.clone());
            let a = measure_mixing(&data, prior, &s_cv, attempts, seeds[1], Precondition::Off, burn_in, samples, init.clone())?;
            let b = measure_mixing(&data, prior, &s_plain, attempts, seeds[2], Precondition::Off, burn_in, samples, init)?;
            Ok((a.report.mixing_time, b.report.mixing_time, seeds))
        })
        .collect::<Result<_>>()?;

    let mut runs_t = Table::new("runs", &["k", "replicate", "mixing_cv", "mixing_plain", "ratio"]);
    let mut summary = Table::new("summary", &["k", "replicates", "median_ratio", "mean_ratio", "sd_ratio"]);
    let mut records = Vec::new();
    for (g, k) in ks.iter().enumerate() {
        let chunk = &results[g * reps..(g + 1) * reps];
        let mut ratios = Vec::new();
        for (r, c) in chunk.iter().enumerate() {
            let ratio = match (c.0, c.1) {
                (Some(a), Some(b)) => Some(a / b),
                _ => None,
            };
            ratios.extend(ratio);
            runs_t.push(vec![k.to_string(), r.to_string(), fmt_opt(c.0), fmt_opt(c.1), fmt_opt(ratio)]);
            for (label, s) in ["data", "importance,cv", "importance"].iter().zip(c.2) {
                records.push(RunRecord {
                    label: format!("k={k}/{label}"),
                    replicate: r,
                    seed: s,
                });
            }
        }
        let (m, sd) = if ratios.is_empty() { (f64::NAN, f64::NAN) } else { mean_sd(&ratios) };
        let med = if ratios.is_empty() { f64::NAN } else { median(&ratios) };
        summary.push(vec![k.to_string(), ratios.len().to_string(), med.to_string(), m.to_string(), sd.to_string()]);
    }
    Ok((vec![summary, runs_t], records))
}

#[allow(clippy::too_many_arguments)]
fn highdim_suite(
    spec: &SynthSpec,
    prior: &PriorSpec,
    attempts: u64,
    pre: Precondition,
    burn_in: f64,
    samples: usize,
    lags: &[usize],
    reps: usize,
    seed: u64,
) -> Result<Suite> {
    let variants = [("off", Precondition::Off), ("adaptive", pre)];
    let tasks: Vec<(usize, usize)> = (0..reps).flat_map(|r| (0..2).map(move |v| (r, v))).collect();
    let scheme_spec: SchemeSpec = "importance".parse()?;
    let results: Vec<(MixingReport, Vec<Vec<f64>>, u64, u64)> = tasks
        .par_iter()
        .map(|&(r, v)| {
            let data_seed = derive_seed(seed, r as u64, 0);
            let run_seed = derive_seed(seed, r as u64, 1 + v as u64);
            let data = generate_seeded(spec, data_seed)?;
            let star = mode_of(&data, prior)?;
            let scheme = SubsamplingScheme::build(&data, scheme_spec, None)?;
            let m = measure_mixing(&data, prior, &scheme, attempts, run_seed, variants[v].1, burn_in, samples, ZigZagState::at(star))?;
            let disc = discretize(&m.skeleton, m.report.delta_t)?;
            let acfs = disc
                .series
                .iter()
                .map(|s| {
                    let rho = autocorrelation(s);
                    lags.iter().map(|&l| rho.get(l).copied().unwrap_or(f64::NAN)).collect()
                })
                .collect();
            Ok((mixing_report_from(&disc)?, acfs, data_seed, run_seed))
        })
        .collect::<Result<_>>()?;

    let mut acf_t = Table::new("acf", &["precondition", "replicate", "dim", "lag", "acf"]);
    let mut iact_t = Table::new("iact", &["precondition", "replicate", "dim", "iact"]);
    let mut summary = Table::new("summary", &["precondition", "replicates", "median_max_iact", "mean_max_iact", "sd_max_iact"]);
    let mut records = Vec::new();
    for (v, (label, _)) in variants.iter().enumerate() {
        let mut maxes = Vec::new();
        for r in 0..reps {
            let (rep, acfs, ds, rs) = &results[r * 2 + v];
            for (d, a) in acfs.iter().enumerate() {
                for (l, x) in lags.iter().zip(a) {
                    acf_t.push(vec![label.to_string(), r.to_string(), d.to_string(), l.to_string(), x.to_string()]);
                }
            }
            for (d, t) in rep.iact.iter().enumerate() {
                iact_t.push(vec![label.to_string(), r.to_string(), d.to_string(), fmt_opt(*t)]);
            }
            maxes.extend(rep.mixing_time);
            if v == 0 {
                records.push(RunRecord {
                    label: "data".into(),
                    replicate: r,
                    seed: *ds,
                });
            }
            records.push(RunRecord {
                label: format!("importance/{label}"),
                replicate: r,
                seed: *rs,
            });
        }
        let (m, sd) = if maxes.is_empty() { (f64::NAN, f64::NAN) } else { mean_sd(&maxes) };
        let med = if maxes.is_empty() { f64::NAN } else { median(&maxes) };
        summary.push(vec![label.to_string(), maxes.len().to_string(), med.to_string(), m.to_string(), sd.to_string()]);
    }
    Ok((vec![summary, iact_t, acf_t], records))
}

/// Builds a scheme with the posterior mode as reference when it needs one.
pub fn build_scheme(data: &Dataset, prior: &PriorSpec, spec: SchemeSpec, mode: Option<&[f64]>) -> Result<SubsamplingScheme> {
    if spec.needs_reference() {
        let star = match mode {
            Some(m) => m.to_vec(),
            None => mode_of(data, prior)?,
        };
        SubsamplingScheme::build(data, spec, Some(&star))
    } else {
        SubsamplingScheme::build(data, spec, None)
    }
}

#[allow(clippy::too_many_arguments)]
fn comparison_suite(
    source: &DataSource,
    schemes: &[SchemeSpec],
    prior: &PriorSpec,
    attempts: u64,
    burn_in: f64,
    samples: usize,
    reps: usize,
    seed: u64,
) -> Result<Suite> {
    // One dataset per replicate for random sources; a CSV is shared.
    let datasets: Vec<(u64, Dataset, Vec<f64>)> = (0..reps)
        .into_par_iter()
        .map(|r| {
            let ds = derive_seed(seed, r as u64, 0);
            let data = source.load(ds)?;
            let star = mode_of(&data, prior)?;
            Ok((ds, data, star))
        })
        .collect::<Result<_>>()?;
    let tasks: Vec<(usize, usize)> = (0..reps).flat_map(|r| (0..schemes.len()).map(move |s| (r, s))).collect();
    let results: Vec<(Option<f64>, f64, u64)> = tasks
        .par_iter()
        .map(|&(r, s)| {
            let (_, data, star) = &datasets[r];
            let scheme = build_scheme(data, prior, schemes[s], Some(star))?;
            let rs = derive_seed(seed, r as u64, 1 + s as u64);
            let m = measure_mixing(data, prior, &scheme, attempts, rs, Precondition::Off, burn_in, samples, ZigZagState::at(star.clone()))?;
            Ok((m.report.mixing_time, m.end_time, rs))
        })
        .collect::<Result<_>>()?;

    let mut runs_t = Table::new("runs", &["scheme", "replicate", "mixing_time", "simulated_time"]);
    let mut summary = Table::new("summary", &["scheme", "replicates", "median_mixing_time", "mean_mixing_time", "sd_mixing_time"]);
    let mut records = Vec::new();
    for (r, (ds, _, _)) in datasets.iter().enumerate() {
        if source.is_random() {
            records.push(RunRecord {
                label: "data".into(),
                replicate: r,
                seed: *ds,
            });
        }
    }
    for (s, spec) in schemes.iter().enumerate() {
        let mut mts = Vec::new();
        for r in 0..reps {
            let (mt, t, rs) = results[r * schemes.len() + s];
            runs_t.push(vec![format!("\"{spec}\""), r.to_string(), fmt_opt(mt), t.to_string()]);
            mts.extend(mt);
            records.push(RunRecord {
                label: spec.to_string(),
                replicate: r,
                seed: rs,
            });
        }
        let (m, sd) = if mts.is_empty() { (f64::NAN, f64::NAN) } else { mean_sd(&mts) };
        let med = if mts.is_empty() { f64::NAN } else { median(&mts) };
        summary.push(vec![format!("\"{spec}\""), mts.len().to_string(), med.to_string(), m.to_string(), sd.to_string()]);
    }
    Ok((vec![summary, runs_t], records))
}

#[allow(clippy::too_many_arguments)]
fn single_suite(
    source: &DataSource,
    spec: SchemeSpec,
    prior: &PriorSpec,
    attempts: u64,
    precondition: Precondition,
    burn_in: f64,
    samples: usize,
    reps: usize,
    seed: u64,
) -> Result<Suite> {
    let results: Vec<(MixingRun, crate::diagnostics::TrajectoryMoments, u64, u64)> = (0..reps)
        .into_par_iter()
        .map(|r| {
            let ds = derive_seed(seed, r as u64, 0);
            let rs = derive_seed(seed, r as u64, 1);
            let data = source.load(ds)?;
            let star = mode_of(&data, prior)?;
            let scheme = build_scheme(&data, prior, spec, Some(&star))?;
            let m = measure_mixing(&data, prior, &scheme, attempts, rs, precondition, burn_in, samples, ZigZagState::at(star))?;
            let mom = crate::diagnostics::integrate_moments(&m.skeleton);
            Ok((m, mom, ds, rs))
        })
        .collect::<Result<_>>()?;
    let mut dims = Table::new("dimensions", &["replicate", "dim", "mean", "variance", "iact", "ess", "speed"]);
    let mut summary = Table::new("summary", &["replicate", "simulated_time", "flips", "mixing_time", "delta_t"]);
    let mut records = Vec::new();
    for (r, (m, mom, ds, rs)) in results.iter().enumerate() {
        let mean = mom.mean();
        let var = mom.variance();
        for d in 0..mean.len() {
            dims.push(vec![
                r.to_string(),
                d.to_string(),
                mean[d].to_string(),
                var[d].to_string(),
                fmt_opt(m.report.iact[d]),
                fmt_opt(m.report.ess[d]),
                m.final_alpha[d].to_string(),
            ]);
        }
        summary.push(vec![
            r.to_string(),
            m.end_time.to_string(),
            m.flips.to_string(),
            fmt_opt(m.report.mixing_time),
            m.report.delta_t.to_string(),
        ]);
        if source.is_random() {
            records.push(RunRecord {
                label: "data".into(),
                replicate: r,
                seed: *ds,
            });
        }
        records.push(RunRecord {
            label: spec.to_string(),
            replicate: r,
            seed: *rs,
        });
    }
    Ok((vec![summary, dims], records))
}

/// Reads a table cell as a float.
pub fn cell(table: &Table, row: usize, column: &str) -> Option<f64> {
    let c = table.column(column)?;
    table.rows.get(row)?.get(c)?.parse().ok()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seeds_are_distinct() {
        let mut seen = std::collections::HashSet::new();
        for r in 0..50 {
            for s in 0..5 {
                assert!(seen.insert(derive_seed(7, r, s)));
            }
        }
    }

    #[test]
    fn config_round_trip() {
        let cfg = ExperimentConfig::from_json(
            r#"{"experiment":"scaling_alpha","n":100,"p":2,"alphas":[0.5],"replicates":2,"seed":3}"#,
        )
        .unwrap();
        let back = ExperimentConfig::from_json(&serde_json::to_string(&cfg).unwrap()).unwrap();
        assert_eq!(cfg, back);
        assert_eq!(cfg.name(), "scaling_alpha");
    }

    #[test]
    fn invalid_configs() {
        assert!(ExperimentConfig::from_json(r#"{"experiment":"nope"}"#).is_err());
        assert!(ExperimentConfig::from_json(
            r#"{"experiment":"scaling_alpha","n":100,"p":2,"alphas":[0.0]}"#
        )
        .is_err());
        assert!(ExperimentConfig::from_json(
            r#"{"experiment":"scaling_alpha","n":100,"p":2,"alphas":[0.5],"replicates":0}"#
        )
        .is_err());
    }

    #[test]
    fn small_gain_suite_is_deterministic() {
        let cfg = ExperimentConfig::from_json(
            r#"{"experiment":"scaling_alpha","n":100,"p":2,"alphas":[0.5,0.25],"attempts":500,"replicates":2,"seed":1}"#,
        )
        .unwrap();
        let a = run_experiment(&cfg, Some(1)).unwrap();
        let b = run_experiment(&cfg, Some(3)).unwrap();
        assert_eq!(a, b);
        let s = a.table("summary").unwrap();
        assert_eq!(s.rows.len(), 2);
        assert_eq!(s.rows[0][1], "2");
    }
}
