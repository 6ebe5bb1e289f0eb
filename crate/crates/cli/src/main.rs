//! `drainet`: runs the simulator's experiments and writes their verdicts as
//! CSV or JSON.

mod commands;
mod config;
mod output;

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use commands::{CollapseOpts, DualityOpts, PathOpts, Task};
use config::{Format, Partial, RunConfig};

const AFTER_HELP: &str = "\
Settings are taken from defaults, then --config, then flags.
Exit status: 0 when every gating verdict passes, 2 when any fails, 1 on usage or runtime errors.
DRAINET_THREADS caps the number of worker threads; results do not depend on it.";

#[derive(Parser)]
#[command(name = "drainet", version, about = "Monte Carlo experiments for the drainage network with branching", after_help = AFTER_HELP)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// Flat `key = value` config file (keys as the long flags)
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Probability that a site is open, in (0, 1) [default: 0.5]
    #[arg(long, global = true)]
    p: Option<f64>,
    /// Branching strength b, ε = b / n^α [default: 1]
    #[arg(long, global = true)]
    b: Option<f64>,
    /// Scaling parameter n; excludes --epsilon [default: 50]
    #[arg(long, global = true)]
    n: Option<u64>,
    /// Branching parameter ε in [0, 1]; excludes --n
    #[arg(long, global = true)]
    epsilon: Option<f64>,
    /// Exponent α in ε = b / n^α [default: 1, collapse: 2]
    #[arg(long, global = true)]
    alpha: Option<f64>,
    /// Master seed [default: 1]
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Replicas (chains for one-step estimators) [default: 10000]
    #[arg(long, global = true)]
    replicas: Option<u64>,
    /// Longest time horizon in lattice steps [default: 100000]
    #[arg(long = "t-max", global = true)]
    t_max: Option<u64>,
    /// Output file [default: standard output]
    #[arg(long, global = true, value_name = "PATH")]
    out: Option<PathBuf>,
    /// Output format [default: csv]
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
}

impl Global {
    fn partial(&self) -> Partial {
        Partial {
            p: self.p,
            b: self.b,
            n: self.n,
            epsilon: self.epsilon,
            alpha: self.alpha,
            seed: self.seed,
            replicas: self.replicas,
            t_max: self.t_max,
            out: self.out.clone(),
            format: self.format,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Sample an l-path and an r-path from the first open cell at or right of x
    SimulatePath {
        #[arg(long, default_value_t = 100)]
        steps: usize,
        #[arg(long, default_value_t = 0, allow_negative_numbers = true)]
        x: i64,
    },
    /// Check non-crossing and branch correspondence on square windows
    VerifyDuality {
        #[arg(long, default_value_t = 10)]
        windows: u64,
        #[arg(long, default_value_t = 200)]
        size: i64,
        #[arg(long, default_value_t = 10)]
        margin: i64,
    },
    /// Exact and Monte Carlo one-step law without branching
    VerifyKernel,
    /// Drift of l- and r-paths, scaled by n
    EstimateDrift,
    /// Increment variance against the kernel constant
    EstimateVariance,
    /// Fraction of visited cells that branch
    EstimateBranchrate,
    /// Coalescence-time tails of forward and dual paths
    CoalTail,
    /// Mean l/r gap for α > 1 at n and 2n
    Collapse {
        /// Horizon T in rescaled time
        #[arg(long, default_value_t = 1.0)]
        horizon: f64,
        /// Level exponent of the maximal-inequality check
        #[arg(long, default_value_t = 0.5)]
        gamma: f64,
    },
    /// Non-meeting probability of two r-paths against the Gaussian formula
    Survival {
        /// Initial separations in rescaled space
        #[arg(long, value_delimiter = ',', default_values_t = [0.5, 1.0])]
        delta: Vec<f64>,
        /// Time in rescaled units
        #[arg(long, default_value_t = 1.0)]
        t: f64,
    },
    /// Lattice l/r gap law against the continuum left-right pair (diagnostic)
    LrCompare {
        /// Checkpoint times in rescaled units
        #[arg(long, value_delimiter = ',', default_values_t = [1.0])]
        t: Vec<f64>,
    },
    /// Overshoot of the l/r gap over level n
    Overshoot,
    /// Dual one-step law and its mean at integer and half-integer positions
    DualMean,
    /// Every estimator with default options
    All,
}

impl Command {
    fn tasks(&self) -> Vec<Task> {
        match self {
            Command::SimulatePath { steps, x } => vec![Task::SimulatePath(PathOpts { steps: *steps, x: *x })],
            Command::VerifyDuality { windows, size, margin } => {
                vec![Task::VerifyDuality(DualityOpts {
                    windows: *windows,
                    size: *size,
                    margin: *margin,
                })]
            }
            Command::VerifyKernel => vec![Task::VerifyKernel],
            Command::EstimateDrift => vec![Task::EstimateDrift],
            Command::EstimateVariance => vec![Task::EstimateVariance],
            Command::EstimateBranchrate => vec![Task::EstimateBranchrate],
            Command::CoalTail => vec![Task::CoalTail],
            Command::Collapse { horizon, gamma } => vec![Task::Collapse(CollapseOpts {
                horizon: *horizon,
                gamma: *gamma,
            })],
            Command::Survival { delta, t } => vec![Task::Survival {
                deltas: delta.clone(),
                t: *t,
            }],
            Command::LrCompare { t } => vec![Task::LrCompare { times: t.clone() }],
            Command::Overshoot => vec![Task::Overshoot],
            Command::DualMean => vec![Task::DualMean],
            Command::All => Task::all(),
        }
    }
}

fn configure_threads() -> Result<()> {
    if let Ok(v) = std::env::var("DRAINET_THREADS") {
        let n: usize = v
            .trim()
            .parse()
            .with_context(|| format!("DRAINET_THREADS must be a positive integer, got {v:?}"))?;
        anyhow::ensure!(n >= 1, "DRAINET_THREADS must be at least 1");
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<bool> {
    configure_threads()?;
    let file = match &cli.global.config {
        Some(path) => Partial::from_file(path)?,
        None => Partial::default(),
    };
    let cfg = RunConfig::resolve(file.overlay(cli.global.partial()))?;

    let mut rows = Vec::new();
    let mut all_passed = true;
    for task in cli.command.tasks() {
        let outcome = commands::run(&task, &cfg)?;
        all_passed &= outcome.all_passed;
        rows.extend(outcome.rows);
    }

    // results are written only once everything has succeeded
    match &cfg.out {
        Some(path) => {
            let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
            let mut w = BufWriter::new(file);
            output::write_rows(&rows, cfg.format, &mut w)?;
            w.flush()?;
        }
        None => {
            let stdout = io::stdout();
            let mut w = stdout.lock();
            output::write_rows(&rows, cfg.format, &mut w)?;
            w.flush()?;
        }
    }
    if !all_passed {
        eprintln!("drainet: at least one verdict failed");
    }
    Ok(all_passed)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("drainet: error: {e:#}");
            ExitCode::from(1)
        }
    }
}
