//! Subcommands: each turns a resolved configuration into output rows.

use std::time::Instant;

use anyhow::{ensure, Result};
use drainet_core::estimators::{self as est, Params};
use drainet_core::lattice_paths::walk;
use drainet_core::{Cell, EnvParams, Environment, ExperimentReport, Kind, Selector};

use crate::config::RunConfig;
use crate::output::Row;

// steps per replica chain for the one-step estimators
const KERNEL_CHAIN: u64 = 100;
const BRANCH_CHAIN: u64 = 100;
const DRIFT_CHAIN: u64 = 1_000;
const VARIANCE_CHAIN: u64 = 1_000;
const DUAL_CHAIN: u64 = 300;

const COAL_KS: [i64; 3] = [1, 2, 4];
const COAL_GRID_POINTS: usize = 10;

#[derive(Debug, Clone)]
pub struct PathOpts {
    pub steps: usize,
    pub x: i64,
}

#[derive(Debug, Clone)]
pub struct DualityOpts {
    pub windows: u64,
    pub size: i64,
    pub margin: i64,
}

#[derive(Debug, Clone)]
pub struct CollapseOpts {
    pub horizon: f64,
    pub gamma: f64,
}

#[derive(Debug, Clone)]
pub enum Task {
    SimulatePath(PathOpts),
    VerifyDuality(DualityOpts),
    VerifyKernel,
    EstimateDrift,
    EstimateVariance,
    EstimateBranchrate,
    CoalTail,
    Collapse(CollapseOpts),
    Survival { deltas: Vec<f64>, t: f64 },
    LrCompare { times: Vec<f64> },
    Overshoot,
    DualMean,
}

impl Task {
    pub fn name(&self) -> &'static str {
        match self {
            Task::SimulatePath(_) => "simulate-path",
            Task::VerifyDuality(_) => "verify-duality",
            Task::VerifyKernel => "verify-kernel",
            Task::EstimateDrift => "estimate-drift",
            Task::EstimateVariance => "estimate-variance",
            Task::EstimateBranchrate => "estimate-branchrate",
            Task::CoalTail => "coal-tail",
            Task::Collapse(_) => "collapse",
            Task::Survival { .. } => "survival",
            Task::LrCompare { .. } => "lr-compare",
            Task::Overshoot => "overshoot",
            Task::DualMean => "dual-mean",
        }
    }

    /// Every estimator with its default options, in output order.
    pub fn all() -> Vec<Task> {
        vec![
            Task::VerifyKernel,
            Task::EstimateBranchrate,
            Task::EstimateDrift,
            Task::EstimateVariance,
            Task::CoalTail,
            Task::VerifyDuality(DualityOpts {
                windows: 10,
                size: 200,
                margin: 10,
            }),
            Task::DualMean,
            Task::Collapse(CollapseOpts {
                horizon: 1.0,
                gamma: 0.5,
            }),
            Task::Survival {
                deltas: vec![0.5, 1.0],
                t: 1.0,
            },
            Task::LrCompare { times: vec![1.0] },
            Task::Overshoot,
        ]
    }
}

/// Rows of a task, plus whether every gating verdict passed.
pub struct Outcome {
    pub rows: Vec<Row>,
    pub all_passed: bool,
}

impl Outcome {
    fn from_reports(reports: Vec<ExperimentReport>) -> Self {
        Outcome {
            all_passed: reports.iter().all(ExperimentReport::passed),
            rows: reports.iter().map(Row::from_report).collect(),
        }
    }
}

pub fn run(task: &Task, cfg: &RunConfig) -> Result<Outcome> {
    let start = Instant::now();
    eprintln!("drainet: running {}", task.name());
    let out = run_inner(task, cfg)?;
    eprintln!("drainet: {} done in {:.1}s", task.name(), start.elapsed().as_secs_f64());
    Ok(out)
}

fn run_inner(task: &Task, cfg: &RunConfig) -> Result<Outcome> {
    let params = cfg.params(1.0)?;
    let reps = cfg.replicas;
    let reports = match task {
        Task::SimulatePath(opts) => return simulate_path(&params, opts),
        Task::VerifyDuality(o) => est::duality_experiment(params, o.windows, o.size, o.margin)?,
        Task::VerifyKernel => est::kernel_experiment(params, reps, KERNEL_CHAIN)?,
        Task::EstimateDrift => vec![
            est::drift_experiment(params, Kind::Left, reps, DRIFT_CHAIN)?,
            est::drift_experiment(params, Kind::Right, reps, DRIFT_CHAIN)?,
        ],
        Task::EstimateVariance => vec![est::variance_experiment(params, reps, VARIANCE_CHAIN)?],
        Task::EstimateBranchrate => vec![est::branch_rate_experiment(params, reps, BRANCH_CHAIN)?],
        Task::CoalTail => {
            let lo = (cfg.t_max / 1_000).max(1);
            ensure!(cfg.t_max > lo, "t-max too small for a tail fit");
            let grid = est::log_grid(lo, cfg.t_max, COAL_GRID_POINTS);
            est::coalescence_tail_experiment(params, &COAL_KS, &grid, reps, reps)?
        }
        Task::Collapse(o) => {
            let params = cfg.params(2.0)?;
            est::collapse_experiment(params, o.horizon, &[params.n, 2 * params.n], reps, o.gamma)?
        }
        Task::Survival { deltas, t } => deltas
            .iter()
            .map(|&d| est::survival_experiment(params, d, *t, reps))
            .collect::<Result<_, _>>()?,
        Task::LrCompare { times } => est::lr_comparison_experiment(params, 0, times, reps)?,
        Task::Overshoot => est::overshoot_experiment(params, reps, cfg.t_max.max(1_000_000))?,
        Task::DualMean => est::dual_kernel_experiment(params, reps, DUAL_CHAIN)?,
    };
    Ok(Outcome::from_reports(reports))
}

/// An l-path and an r-path from the first open cell at or right of
/// `(x, 0)`. Each row is one knot: `estimate` holds the position and
/// `samples` the time.
fn simulate_path(params: &Params, opts: &PathOpts) -> Result<Outcome> {
    ensure!(opts.steps >= 1, "steps must be at least 1");
    let env = Environment::new(EnvParams::new(params.p, params.epsilon, params.seed)?);
    let start = (opts.x..)
        .find(|&x| env.is_open(Cell::new(x, 0)))
        .expect("open cells exist");
    let mut rows = Vec::new();
    for (name, selector) in [("path-l", Selector::AlwaysLeft), ("path-r", Selector::AlwaysRight)] {
        let path = walk(&env, Cell::new(start, 0), &selector, opts.steps)?;
        rows.extend(path.cells().map(|c| Row::value(name, params, c.x as f64, c.t as u64)));
    }
    Ok(Outcome { rows, all_passed: true })
}
