//! `cesaro-lab`: run integrability diagnostics and convergence experiments
//! and write their results as CSV and JSON next to a replayable manifest.

mod jobs;
mod parse;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use cesaro_core::convergence::{BoundParams, SeriesMode};
use cesaro_core::cui::default_level_grid;
use cesaro_core::poussin::{DEFAULT_J_MAX, DEFAULT_LEVEL_CAP};
use cesaro_core::{DistributionSpec, ExperimentConfig, MultiIndex};

use jobs::{ConvergeJob, CuiJob, Failure, Job, OracleJob, PoussinJob};

const THREADS_ENV: &str = "CESARO_LAB_THREADS";

#[derive(Parser)]
#[command(name = "cesaro-lab", version, about = "Cesàro integrability diagnostics and maximal partial-sum experiments")]
struct Cli {
    /// Worker threads (falls back to CESARO_LAB_THREADS).
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Tail suprema over a grid of truncation levels.
    CheckCui(CheckCuiArgs),
    /// Build a de La Vallée Poussin function from tail thresholds and check it.
    Poussin(PoussinArgs),
    /// Moments of maximal partial sums along a schedule of boxes.
    Converge(ConvergeArgs),
    /// Compare fast kernels against direct evaluation.
    OracleCheck(OracleArgs),
    /// Re-run the job recorded in a manifest.
    Replay(ReplayArgs),
}

#[derive(Args)]
struct CheckCuiArgs {
    /// Distribution spec (JSON file).
    #[arg(long)]
    spec: PathBuf,
    #[arg(long, default_value_t = 1.0)]
    p: f64,
    /// Increasing truncation levels; defaults to 2^(k/2), k = -8..40.
    #[arg(long, value_parser = parse::f64_list)]
    a_grid: Option<::std::vec::Vec<f64>>,
    #[arg(long, value_parser = parse::multi_index, default_value = "64,64")]
    horizon: MultiIndex,
    #[arg(long, default_value_t = 200)]
    reps: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Also run the event-criterion equivalence at these epsilons.
    #[arg(long, value_parser = parse::f64_list)]
    eps: Option<::std::vec::Vec<f64>>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct PoussinArgs {
    #[arg(long)]
    spec: PathBuf,
    #[arg(long, default_value_t = 1.0)]
    p: f64,
    #[arg(long, default_value_t = DEFAULT_J_MAX)]
    j_max: usize,
    #[arg(long, value_parser = parse::f64_list, default_value = "0.5,0.1")]
    eps: ::std::vec::Vec<f64>,
    #[arg(long, value_parser = parse::multi_index, default_value = "64,64")]
    horizon: MultiIndex,
    #[arg(long, default_value_t = 200)]
    reps: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = DEFAULT_LEVEL_CAP)]
    level_cap: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Lp,
    L1,
}

#[derive(Args)]
struct ConvergeArgs {
    #[arg(long, value_enum)]
    mode: Mode,
    #[arg(long, required_unless_present = "config", conflicts_with = "config")]
    spec: Option<PathBuf>,
    /// Full experiment config (JSON file).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Moment order; defaults to 0.5 in lp mode and must be 1 in l1 mode.
    #[arg(long)]
    p: Option<f64>,
    /// doubling-d1, doubling-d2, doubling-d3, or boxes like "4,4;8,8".
    #[arg(long, value_parser = parse::schedule, default_value = "doubling-d1")]
    schedule: ::std::vec::Vec<MultiIndex>,
    #[arg(long, default_value_t = 200)]
    reps: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// eps,a (lp) or eps,a,C (l1).
    #[arg(long, value_parser = parse::bound)]
    bound: Option<BoundParams>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct OracleArgs {
    #[arg(long, default_value_t = 200, value_parser = clap::value_parser!(u32).range(1..))]
    trials: u32,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, hide = true)]
    inject_fault: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ReplayArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Serialize, Deserialize)]
struct Manifest {
    command: String,
    version: String,
    seed: u64,
    job: Job,
    outputs: Vec<String>,
    duration_secs: f64,
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, Failure> {
    let text = fs::read_to_string(path).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))
}

fn resolve(command: Command) -> Result<(Job, Option<PathBuf>), Failure> {
    Ok(match command {
        Command::CheckCui(a) => (
            Job::CheckCui(CuiJob {
                spec: read_json(&a.spec)?,
                p: a.p,
                a_grid: a.a_grid.unwrap_or_else(default_level_grid),
                horizon: a.horizon,
                reps: a.reps,
                seed: a.seed,
                eps: a.eps.unwrap_or_default(),
            }),
            Some(a.out),
        ),
        Command::Poussin(a) => (
            Job::Poussin(PoussinJob {
                spec: read_json(&a.spec)?,
                p: a.p,
                j_max: a.j_max,
                eps: a.eps,
                horizon: a.horizon,
                reps: a.reps,
                seed: a.seed,
                level_cap: a.level_cap,
            }),
            Some(a.out),
        ),
        Command::Converge(a) => {
            let mode = match a.mode {
                Mode::Lp => SeriesMode::Lp,
                Mode::L1 => SeriesMode::L1,
            };
            let center = mode == SeriesMode::L1;
            let config = match &a.config {
                Some(path) => {
                    let cfg: ExperimentConfig = read_json(path)?;
                    if cfg.center != center {
                        return Err(Failure::Usage("config center flag does not match --mode".into()));
                    }
                    cfg
                }
                None => {
                    let spec: DistributionSpec = read_json(a.spec.as_ref().expect("clap requires spec or config"))?;
                    let p = a.p.unwrap_or(if center { 1.0 } else { 0.5 });
                    ExperimentConfig {
                        spec,
                        p,
                        n_schedule: a.schedule,
                        reps: a.reps,
                        seed: a.seed,
                        center,
                        bound_params: a.bound,
                    }
                }
            };
            config.validate()?;
            (Job::Converge(ConvergeJob { mode, config }), Some(a.out))
        }
        Command::OracleCheck(a) => (
            Job::OracleCheck(OracleJob { trials: a.trials as usize, seed: a.seed, inject_fault: a.inject_fault }),
            a.out,
        ),
        Command::Replay(a) => {
            let m: Manifest = read_json(&a.manifest)?;
            (m.job, Some(a.out))
        }
    })
}

fn configure_threads(flag: Option<usize>) -> Result<(), Failure> {
    let n = match flag {
        Some(n) => Some(n),
        None => match std::env::var(THREADS_ENV) {
            Ok(v) => Some(v.parse().map_err(|_| Failure::Usage(format!("{THREADS_ENV}={v:?} is not a count")))?),
            Err(_) => None,
        },
    };
    if let Some(n) = n {
        if n == 0 {
            return Err(Failure::Usage("thread count must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::Usage(e.to_string()))?;
    }
    Ok(())
}

fn write_outputs(dir: &Path, job: &Job, files: &[(String, String)], duration_secs: f64) -> Result<(), Failure> {
    let io = |e: std::io::Error| Failure::Io(format!("{}: {e}", dir.display()));
    fs::create_dir_all(dir).map_err(io)?;
    for (name, body) in files {
        fs::write(dir.join(name), body).map_err(io)?;
    }
    let manifest = Manifest {
        command: job.name().into(),
        version: env!("CARGO_PKG_VERSION").into(),
        seed: job.seed(),
        job: job.clone(),
        outputs: files.iter().map(|(n, _)| n.clone()).collect(),
        duration_secs,
    };
    let text = serde_json::to_string_pretty(&manifest).map_err(|e| Failure::Io(e.to_string()))?;
    fs::write(dir.join("manifest.json"), text + "\n").map_err(io)
}

fn run(cli: Cli) -> Result<(), Failure> {
    configure_threads(cli.threads)?;
    let (job, out_dir) = resolve(cli.command)?;
    let start = Instant::now();
    let outputs = job.run()?;
    let elapsed = start.elapsed().as_secs_f64();
    if let Some(dir) = &out_dir {
        write_outputs(dir, &job, &outputs.files, elapsed)?;
    }
    for line in &outputs.summary {
        println!("{line}");
    }
    match outputs.failure {
        Some(f) => Err(f),
        None => Ok(()),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {f}");
            ExitCode::from(f.exit_code())
        }
    }
}
