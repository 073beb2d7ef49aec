use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use super::run::{run_single, SummaryStats, Trajectory};
use crate::combiners::Method;
use crate::error::{Error, Result};
use crate::parallel::Execution;

/// Summary of one `run` over all inits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub method: Method,
    pub c: f64,
    pub seed: u64,
    pub steps: u64,
    pub converged: usize,
    pub stalled: usize,
    pub diverged: usize,
    pub runs: Vec<SummaryStats>,
}

impl RunReport {
    pub fn new(cfg: &ExperimentConfig, trajectories: &[Trajectory]) -> Self {
        let runs: Vec<SummaryStats> = trajectories.iter().map(|t| t.summary.clone()).collect();
        RunReport {
            method: cfg.method.method,
            c: cfg.method.c,
            seed: cfg.seed,
            steps: cfg.steps,
            converged: runs.iter().filter(|r| r.converged).count(),
            stalled: runs.iter().filter(|r| r.stalled).count(),
            diverged: runs.iter().filter(|r| r.diverged).count(),
            runs,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub c: f64,
    #[serde(flatten)]
    pub summary: SummaryStats,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub method: Method,
    pub seed: u64,
    pub steps: u64,
    pub rows: Vec<SweepRow>,
}

/// Full trajectories of a sweep, grouped by c in input order.
pub fn sweep_c_trajectories(
    cfg: &ExperimentConfig,
    c_values: &[f64],
    exec: Execution,
) -> Result<Vec<(f64, Vec<Trajectory>)>> {
    if !matches!(cfg.method.method, Method::Cagrad | Method::CagradFast) {
        return Err(Error::Config(format!(
            "sweeping c needs method cagrad or cagrad_fast, got {}",
            cfg.method.method.name()
        )));
    }
    if c_values.is_empty() {
        return Err(Error::Config("the c list is empty".into()));
    }
    let mut configs = Vec::with_capacity(c_values.len());
    for &c in c_values {
        let mut one = cfg.clone();
        one.method.c = c;
        let (problem, inits) = one.resolve()?;
        configs.push((one, problem, inits));
    }
    let jobs: Vec<(usize, usize)> = configs
        .iter()
        .enumerate()
        .flat_map(|(ci, (_, _, inits))| (0..inits.len()).map(move |i| (ci, i)))
        .collect();
    let results = exec.map(&jobs, |_, &(ci, i)| {
        let (one, problem, inits) = &configs[ci];
        run_single(one, problem.as_ref(), i, &inits[i], None)
    });
    let mut out: Vec<(f64, Vec<Trajectory>)> = c_values.iter().map(|&c| (c, Vec::new())).collect();
    for (&(ci, _), r) in jobs.iter().zip(results) {
        out[ci].1.push(r?);
    }
    Ok(out)
}

/// One summary row per (c, init).
pub fn sweep_c(cfg: &ExperimentConfig, c_values: &[f64], exec: Execution) -> Result<SweepReport> {
    let rows = sweep_c_trajectories(cfg, c_values, exec)?
        .into_iter()
        .flat_map(|(c, trs)| trs.into_iter().map(move |t| SweepRow { c, summary: t.summary }))
        .collect();
    Ok(SweepReport {
        method: cfg.method.method,
        seed: cfg.seed,
        steps: cfg.steps,
        rows,
    })
}
