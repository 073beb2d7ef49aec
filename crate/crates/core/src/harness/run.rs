use std::time::{Duration, Instant};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, StepperSpec};
use crate::error::{Error, Result};
use crate::gradcore::ParamVector;
use crate::optim::{decaying_step_size, sgd_update, AdamState};
use crate::parallel::Execution;
use crate::problems::{average_loss, Problem};
use crate::solvers::pareto_stationarity;

/// A run has reached the Pareto set once pareto_stationarity falls to this.
pub const CONVERGENCE_THRESHOLD: f64 = 1e-2;
/// A run whose final pareto_stationarity exceeds this is considered stuck.
pub const STALL_THRESHOLD: f64 = 0.1;

/// One logged step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogRow {
    pub step: u64,
    pub theta: Vec<f64>,
    pub losses: Vec<f64>,
    pub l0: f64,
    pub g0_norm: f64,
    pub pareto_stat: f64,
    pub min_dot: f64,
    pub constraint_norm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryStats {
    pub init_index: usize,
    pub init: Vec<f64>,
    pub final_theta: Vec<f64>,
    pub final_losses: Vec<f64>,
    pub final_pareto_stationarity: f64,
    pub converged: bool,
    pub stalled: bool,
    /// First step at which pareto_stationarity was at or below the threshold.
    pub steps_to_converge: Option<u64>,
    pub diverged: bool,
    /// Step at which evaluation failed, with the reason.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub divergence: Option<(u64, String)>,
    /// Not serialized, so summaries stay byte-identical across runs.
    #[serde(skip)]
    pub wall_time: Duration,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub rows: Vec<LogRow>,
    pub summary: SummaryStats,
}

/// Per-step quantities the convergence-bound checks need but the CSV does not carry.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepTrace {
    pub l0: f64,
    pub g0_norm: f64,
    pub gw_norm: f64,
    pub alpha: f64,
}

/// Runs every init with the default execution mode.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Vec<Trajectory>> {
    run_experiment_with(cfg, Execution::default())
}

pub fn run_experiment_with(cfg: &ExperimentConfig, exec: Execution) -> Result<Vec<Trajectory>> {
    let (problem, inits) = cfg.resolve()?;
    let problem = problem.as_ref();
    exec.map(&inits, |i, init| run_single(cfg, problem, i, init, None))
        .into_iter()
        .collect()
}

enum Stepper {
    Fixed(f64),
    Adam(f64, AdamState),
    Decaying { c: f64, h: f64 },
}

/// One trajectory. The rng stream is derived from (seed, init index) so
/// results do not depend on which thread runs which init.
pub fn run_single(
    cfg: &ExperimentConfig,
    problem: &dyn Problem,
    init_index: usize,
    init: &[f64],
    mut trace: Option<&mut Vec<StepTrace>>,
) -> Result<Trajectory> {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(init_index as u64);
    let shared = problem.shared_dim();
    let mut stepper = match cfg.stepper {
        StepperSpec::Fixed { lr } => Stepper::Fixed(lr),
        StepperSpec::Adam { lr } => Stepper::Adam(lr, AdamState::new(problem.dim())),
        StepperSpec::Decaying { .. } => Stepper::Decaying {
            c: cfg.method.c,
            h: cfg
                .lipschitz(problem)
                .ok_or_else(|| Error::Config("no Lipschitz constant".into()))?,
        },
    };

    let mut theta = ParamVector::new(init.to_vec())?.into_vec();
    let mut rows = Vec::with_capacity((cfg.steps / cfg.log_every + 1) as usize);
    let mut steps_to_converge = None;
    let mut divergence = None;
    let mut last: Option<(Vec<f64>, Vec<f64>, f64)> = None;
    let mut direction = vec![0.0; problem.dim()];

    for t in 0..=cfg.steps {
        let outcome = (|| -> Result<_> {
            let p = ParamVector::new(theta.clone())
                .map_err(|_| Error::NumericalDegeneracy("parameters became non-finite".into()))?;
            let ev = problem.evaluate(&p)?;
            if ev.losses.iter().any(|l| !l.is_finite()) {
                return Err(Error::NumericalDegeneracy("non-finite loss".into()));
            }
            let ps = pareto_stationarity(&ev.gradients, &cfg.method.solver)?;
            let res = cfg.method.combine(&ev.gradients, &mut rng)?;
            Ok((ev, ps, res))
        })();
        let (ev, ps, res) = match outcome {
            Ok(v) => v,
            Err(e) => {
                divergence = Some((t, e.to_string()));
                break;
            }
        };
        let l0 = average_loss(&ev.losses);
        let g0_norm = crate::gradcore::norm(ev.gradients.average());
        if ps <= CONVERGENCE_THRESHOLD && steps_to_converge.is_none() {
            steps_to_converge = Some(t);
        }
        if t % cfg.log_every == 0 {
            rows.push(LogRow {
                step: t,
                theta: theta.clone(),
                losses: ev.losses.clone(),
                l0,
                g0_norm,
                pareto_stat: ps,
                min_dot: res.min_dot,
                constraint_norm: res.constraint_norm,
            });
        }
        last = Some((theta.clone(), ev.losses, ps));
        if t == cfg.steps {
            break;
        }

        direction[..shared].copy_from_slice(&res.d);
        direction[shared..].copy_from_slice(&ev.head_gradient);
        let alpha = match &mut stepper {
            Stepper::Fixed(lr) => {
                sgd_update(&mut theta, &direction, *lr);
                *lr
            }
            Stepper::Adam(lr, state) => {
                state.update(&mut theta, &direction, *lr);
                *lr
            }
            Stepper::Decaying { c, h } => {
                // at a stationary point the step is zero and θ stays put
                let alpha = if g0_norm > 0.0 {
                    decaying_step_size(*c, *h, g0_norm, res.gw_norm())?
                } else {
                    0.0
                };
                sgd_update(&mut theta, &direction, alpha);
                alpha
            }
        };
        if let Some(tr) = trace.as_deref_mut() {
            tr.push(StepTrace {
                l0,
                g0_norm,
                gw_norm: res.gw_norm(),
                alpha,
            });
        }
    }

    let diverged = divergence.is_some();
    // the last point that evaluated cleanly
    let (final_theta, final_losses, final_ps) = last.unwrap_or_else(|| (init.to_vec(), Vec::new(), f64::NAN));
    let converged = !diverged && final_ps <= CONVERGENCE_THRESHOLD;
    Ok(Trajectory {
        rows,
        summary: SummaryStats {
            init_index,
            init: init.to_vec(),
            final_theta,
            final_losses,
            final_pareto_stationarity: final_ps,
            converged,
            stalled: !diverged && final_ps > STALL_THRESHOLD,
            steps_to_converge: if diverged { None } else { steps_to_converge },
            diverged,
            divergence,
            wall_time: started.elapsed(),
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::combiners::{CombinerSpec, Method};
    use crate::harness::config::ProblemSpec;

    fn quad_cfg(method: CombinerSpec, stepper: StepperSpec, steps: u64) -> ExperimentConfig {
        ExperimentConfig {
            problem: ProblemSpec::Named("quadratic".into()),
            method,
            stepper,
            steps,
            inits: vec![vec![3.0, 4.0]],
            seed: 1,
            log_every: 1,
            output_path: None,
        }
    }

    #[test]
    fn row_count_and_step_zero() {
        let mut cfg = quad_cfg(CombinerSpec::cagrad(0.5), StepperSpec::Fixed { lr: 0.1 }, 10);
        cfg.log_every = 3;
        let tr = run_experiment(&cfg).unwrap();
        assert_eq!(tr[0].rows.len(), 10 / 3 + 1);
        let steps: Vec<u64> = tr[0].rows.iter().map(|r| r.step).collect();
        assert_eq!(steps, vec![0, 3, 6, 9]);
        assert_eq!(tr[0].rows[0].theta, vec![3.0, 4.0]);
        assert_eq!(tr[0].rows[0].l0, 13.0);
    }

    #[test]
    fn quadratic_converges_to_anchor_mean() {
        let cfg = quad_cfg(CombinerSpec::cagrad(0.5), StepperSpec::Fixed { lr: 1.0 }, 80);
        let tr = &run_experiment(&cfg).unwrap()[0];
        let th = &tr.summary.final_theta;
        assert!(th[0].abs() < 1e-6 && th[1].abs() < 1e-6, "{th:?}");
        assert!(tr.summary.converged);
    }

    #[test]
    fn domain_error_marks_divergence() {
        let cfg = ExperimentConfig {
            problem: ProblemSpec::Expressions(super::super::config::ExpressionSpec {
                expressions: vec!["log(x1)".into()],
                dim: 1,
            }),
            method: CombinerSpec::new(Method::Mean),
            stepper: StepperSpec::Fixed { lr: 1.0 },
            steps: 10,
            inits: vec![vec![0.5]],
            seed: 0,
            log_every: 1,
            output_path: None,
        };
        // gradient 1/x pushes x below 0 after one step
        let tr = &run_experiment(&cfg).unwrap()[0];
        assert!(tr.summary.diverged);
        assert!(!tr.summary.converged);
        assert_eq!(tr.rows.len(), 1);
        assert_eq!(tr.summary.divergence.as_ref().unwrap().0, 1);
    }

    #[test]
    fn execution_modes_agree() {
        let mut cfg = quad_cfg(CombinerSpec::new(Method::Pcgrad), StepperSpec::Adam { lr: 0.05 }, 50);
        cfg.inits = vec![vec![3.0, 4.0], vec![-1.0, 2.0], vec![0.5, 0.5]];
        let a = run_experiment_with(&cfg, Execution::Sequential).unwrap();
        let b = run_experiment_with(&cfg, Execution::Parallel).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.rows, y.rows);
        }
    }
}
