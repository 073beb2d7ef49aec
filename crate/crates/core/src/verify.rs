//! Randomized property suites backing the `verify` command.
//!
//! Every case draws from its own ChaCha stream derived from (seed, property,
//! case), so outcomes do not depend on how cases are scheduled. Each case
//! reports an error and the tolerance it must stay within; the tolerance is
//! multiplied by `tolerance_scale` before comparing.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::combiners::{combine_cagrad, combine_cagrad_fast, combine_mean, combine_mgda, combine_pcgrad, CombinerSpec};
use crate::error::{Error, Result};
use crate::gradcore::{dot, gram_and_bias, norm, ParamVector, TaskGradients};
use crate::harness::{run_single, ExperimentConfig, ProblemSpec, StepTrace, StepperSpec};
use crate::parallel::Execution;
use crate::problems::{average_loss, mlp_synth, quadratic, toy_two_task, Problem};
use crate::solvers::{
    cagrad_dual_objective, pareto_stationarity, primal_oracle, project_to_simplex, solve_cagrad_weights,
    solve_minnorm_weights, OracleBudget, SolverSettings,
};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VerifyOptions {
    pub seed: u64,
    pub trials: usize,
    pub tolerance_scale: f64,
    pub execution: Execution,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions {
            seed: 0,
            trials: 200,
            tolerance_scale: 1.0,
            execution: Execution::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PropertyOutcome {
    pub name: &'static str,
    pub passed: bool,
    pub cases: usize,
    pub failures: usize,
    /// Largest error/tolerance ratio seen (before scaling).
    pub worst_ratio: f64,
}

impl std::fmt::Display for PropertyOutcome {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "{} {:<22} cases={:<6} failures={:<4} worst_ratio={:.3e}",
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.cases,
            self.failures,
            self.worst_ratio
        )
    }
}

/// (error, tolerance) pairs from one case.
type Checks = Vec<(f64, f64)>;

fn case_rng(seed: u64, property: u64, case: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((property << 32) | case as u64);
    rng
}

fn summarize(name: &'static str, results: Vec<Result<Checks>>, scale: f64) -> Result<PropertyOutcome> {
    let mut cases = 0;
    let mut failures = 0;
    let mut worst = 0.0_f64;
    for r in results {
        for (err, tol) in r? {
            cases += 1;
            // NaN errors count as failures
            if !(err <= tol * scale) {
                failures += 1;
            }
            let ratio = if tol > 0.0 {
                err / tol
            } else if err > 0.0 {
                f64::INFINITY
            } else {
                0.0
            };
            worst = if ratio.is_nan() { f64::NAN } else { worst.max(ratio) };
        }
    }
    Ok(PropertyOutcome {
        name,
        passed: failures == 0 && cases > 0,
        cases,
        failures,
        worst_ratio: worst,
    })
}

fn gaussian_rows<R: Rng>(rng: &mut R, k: usize, m: usize) -> TaskGradients {
    TaskGradients::new(
        (0..k)
            .map(|_| (0..m).map(|_| rng.sample::<f64, _>(StandardNormal)).collect())
            .collect(),
    )
    .expect("finite gaussian rows")
}

fn random_simplex<R: Rng>(rng: &mut R, k: usize) -> Vec<f64> {
    let e: Vec<f64> = (0..k).map(|_| -rng.random::<f64>().max(1e-300).ln()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|x| x / s).collect()
}

fn dual_value(g: &TaskGradients, c: f64, s: &SolverSettings) -> Result<f64> {
    let gb = gram_and_bias(g);
    Ok(solve_cagrad_weights(&gb, norm(g.average()), c, s)?.value)
}

/// Brute-force primal vs dual on 2-D instances, plus the CAGrad direction
/// reaching the oracle value.
pub fn strong_duality(
    seed: u64,
    trials: usize,
    per_axis: usize,
    scale: f64,
    exec: Execution,
) -> Result<PropertyOutcome> {
    let s = SolverSettings::default();
    let results = exec.map_range(trials, |case| {
        let mut rng = case_rng(seed, 1, case);
        let g = gaussian_rows(&mut rng, 2, 2);
        let g0n = norm(g.average());
        let mut out = Vec::new();
        for c in [0.2, 0.5, 0.8] {
            let oracle = primal_oracle(&g, c, OracleBudget::Grid { per_axis })?;
            let dual = dual_value(&g, c, &s)?;
            out.push(((oracle.value - dual).abs(), 1e-3 * (1.0 + g0n * g0n)));
            let d = combine_cagrad(&g, c, &s)?.d;
            let achieved = g.rows().map(|r| dot(r, &d)).fold(f64::INFINITY, f64::min);
            out.push((oracle.value - achieved, 1e-3));
        }
        Ok(out)
    });
    summarize("strong_duality", results, scale)
}

/// Every CAGrad and CAGrad-Fast direction stays inside its ball.
pub fn feasibility(seed: u64, trials: usize, scale: f64, exec: Execution) -> Result<PropertyOutcome> {
    let s = SolverSettings::default();
    let results = exec.map_range(trials, |case| {
        let mut rng = case_rng(seed, 2, case);
        let k = rng.random_range(2..=5);
        let m = rng.random_range(2..=6);
        let g = gaussian_rows(&mut rng, k, m);
        let c = rng.random_range(0.0..2.0);
        let sub = rng.random_range(1..=k);
        let g0 = g.average().to_vec();
        let radius = c * norm(&g0);
        let mut out = Vec::new();
        for d in [
            combine_cagrad(&g, c, &s)?.d,
            combine_cagrad_fast(&g, c, sub, &mut rng, &s)?.d,
        ] {
            let dev: Vec<f64> = d.iter().zip(&g0).map(|(a, b)| a - b).collect();
            out.push((norm(&dev) - radius, radius * 1e-9));
        }
        Ok(out)
    });
    summarize("feasibility", results, scale)
}

/// minᵢ⟨gᵢ, d*⟩ equals the dual optimum.
pub fn d_reconstruction(seed: u64, trials: usize, scale: f64, exec: Execution) -> Result<PropertyOutcome> {
    let s = SolverSettings::default();
    let results = exec.map_range(trials, |case| {
        let mut rng = case_rng(seed, 3, case);
        let m = rng.random_range(2..=5);
        let g = gaussian_rows(&mut rng, 2, m);
        let c = rng.random_range(0.05..0.95);
        let r = combine_cagrad(&g, c, &s)?;
        if r.lambda_star.is_none() {
            return Ok(Vec::new());
        }
        let achieved = g.rows().map(|row| dot(row, &r.d)).fold(f64::INFINITY, f64::min);
        Ok(vec![(
            (achieved - r.dual_value).abs(),
            1e-8 * r.dual_value.abs().max(1e-300),
        )])
    });
    summarize("d_reconstruction", results, scale)
}

/// One CAGrad step with α ≤ 1/H and c < 1 decreases L0 by at least
/// (α/2)(1 − c²)‖g0‖².
pub fn descent_inequality(seed: u64, trials: usize, scale: f64, exec: Execution) -> Result<PropertyOutcome> {
    let s = SolverSettings::default();
    let results = exec.map_range(trials, |case| {
        let mut rng = case_rng(seed, 4, case);
        let k = rng.random_range(2..=4);
        let m = rng.random_range(2..=4);
        let anchors = gaussian_rows(&mut rng, k, m);
        let q = quadratic(anchors.rows().map(|r| r.to_vec()).collect())?;
        let theta: Vec<f64> = (0..m).map(|_| 3.0 * rng.sample::<f64, _>(StandardNormal)).collect();
        let c = rng.random_range(0.0..0.95);
        let alpha = rng.random_range(0.05..=1.0);
        let p = ParamVector::new(theta.clone())?;
        let g = q.gradients(&p)?;
        let d = combine_cagrad(&g, c, &s)?.d;
        let next: Vec<f64> = theta.iter().zip(&d).map(|(t, di)| t - alpha * di).collect();
        let before = average_loss(&q.losses(&p)?);
        let after = average_loss(&q.losses(&ParamVector::new(next)?)?);
        let g0n = norm(g.average());
        let lhs = after - before + 0.5 * alpha * (1.0 - c * c) * g0n * g0n;
        Ok(vec![(lhs, 1e-10)])
    });
    summarize("descent_inequality", results, scale)
}

/// Σ_t ‖g0(θ_t)‖² ≤ 2(L0(θ0) − L0*)/(α(1 − c²)) along fixed-step runs.
pub fn telescoped_bound(seed: u64, trials: usize, scale: f64, exec: Execution) -> Result<PropertyOutcome> {
    let runs = trials.clamp(1, 50);
    let results = exec.map_range(runs, |case| {
        let mut rng = case_rng(seed, 5, case);
        let k = rng.random_range(2..=3);
        let anchors: Vec<Vec<f64>> = gaussian_rows(&mut rng, k, 2).rows().map(|r| r.to_vec()).collect();
        let init: Vec<f64> = (0..2).map(|_| 4.0 * rng.sample::<f64, _>(StandardNormal)).collect();
        let c = rng.random_range(0.0..0.9);
        let alpha = rng.random_range(0.1..=1.0);
        let report = fixed_step_run(anchors, init, c, alpha, 60)?;
        Ok(vec![(report.gradient_sum - report.bound, 1e-9 * report.bound.max(1.0))])
    });
    summarize("telescoped_bound", results, scale)
}

/// The min-norm solver beats random simplex weights.
pub fn minnorm_dominance(seed: u64, trials: usize, scale: f64, exec: Execution) -> Result<PropertyOutcome> {
    let s = SolverSettings::default();
    let results = exec.map_range(trials, |case| {
        let mut rng = case_rng(seed, 6, case);
        let k = rng.random_range(2..=5);
        let m = rng.random_range(2..=6);
        let g = gaussian_rows(&mut rng, k, m);
        let gb = gram_and_bias(&g);
        let w = solve_minnorm_weights(&gb.gram, &s)?;
        let best = norm(&g.combine(w.as_slice()));
        Ok((0..50)
            .map(|_| {
                let w = random_simplex(&mut rng, k);
                (best - norm(&g.combine(&w)), 1e-9)
            })
            .collect())
    });
    summarize("minnorm_dominance", results, scale)
}

/// Projection is idempotent and closer to v than random simplex points.
pub fn projection_optimality(seed: u64, trials: usize, scale: f64, exec: Execution) -> Result<PropertyOutcome> {
    let results = exec.map_range(trials, |case| {
        let mut rng = case_rng(seed, 7, case);
        let k = rng.random_range(1..=6);
        let v: Vec<f64> = (0..k).map(|_| 2.0 * rng.sample::<f64, _>(StandardNormal)).collect();
        let p = project_to_simplex(&v)?;
        let pp = project_to_simplex(p.as_slice())?;
        let dist = |w: &[f64]| norm(&w.iter().zip(&v).map(|(a, b)| a - b).collect::<Vec<_>>());
        let mut out = vec![(dist(pp.as_slice()) - dist(p.as_slice()), 1e-12)];
        let idem = p
            .as_slice()
            .iter()
            .zip(pp.as_slice())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        out.push((idem, 1e-12));
        let base = dist(p.as_slice());
        for _ in 0..50 {
            let w = random_simplex(&mut rng, k);
            out.push((base - dist(&w), 1e-12));
        }
        Ok(out)
    });
    summarize("projection_optimality", results, scale)
}

/// F is convex on the simplex.
pub fn dual_convexity(seed: u64, trials: usize, scale: f64, exec: Execution) -> Result<PropertyOutcome> {
    let results = exec.map_range(trials, |case| {
        let mut rng = case_rng(seed, 8, case);
        let k = rng.random_range(2..=5);
        let m = rng.random_range(2..=5);
        let g = gaussian_rows(&mut rng, k, m);
        let gb = gram_and_bias(&g);
        let sqrt_phi = rng.random_range(0.0..2.0) * norm(g.average());
        let w1 = random_simplex(&mut rng, k);
        let w2 = random_simplex(&mut rng, k);
        let t: f64 = rng.random();
        let mix: Vec<f64> = w1.iter().zip(&w2).map(|(a, b)| t * a + (1.0 - t) * b).collect();
        let f = |w: &[f64]| cagrad_dual_objective(&gb, sqrt_phi, w);
        Ok(vec![(f(&mix) - t * f(&w1) - (1.0 - t) * f(&w2), 1e-9)])
    });
    summarize("dual_convexity", results, scale)
}

fn bit_mismatch(a: &[f64], b: &[f64]) -> f64 {
    if a.len() == b.len() && a.iter().zip(b).all(|(x, y)| x.to_bits() == y.to_bits()) {
        0.0
    } else {
        1.0
    }
}

/// c = 0 reproduces the mean direction and |S| = K reproduces full CAGrad,
/// bit for bit.
pub fn exact_reductions(seed: u64, trials: usize, scale: f64, exec: Execution) -> Result<PropertyOutcome> {
    let s = SolverSettings::default();
    let results = exec.map_range(trials, |case| {
        let mut rng = case_rng(seed, 9, case);
        let k = rng.random_range(1..=5);
        let m = rng.random_range(1..=6);
        let g = gaussian_rows(&mut rng, k, m);
        let c = rng.random_range(0.0..3.0);
        let zero = combine_cagrad(&g, 0.0, &s)?.d;
        let full = combine_cagrad(&g, c, &s)?;
        let fast = combine_cagrad_fast(&g, c, k, &mut rng, &s)?;
        Ok(vec![
            (bit_mismatch(&zero, &combine_mean(&g).d), 0.5),
            (bit_mismatch(&full.d, &fast.d), 0.5),
        ])
    });
    summarize("exact_reductions", results, scale)
}

/// For two tasks PCGrad does not depend on the draw and leaves no conflict
/// against the other raw gradient.
pub fn pcgrad_pair(seed: u64, trials: usize, scale: f64, exec: Execution) -> Result<PropertyOutcome> {
    let results = exec.map_range(trials, |case| {
        let mut rng = case_rng(seed, 10, case);
        let m = rng.random_range(2..=5);
        let g = gaussian_rows(&mut rng, 2, m);
        let a = combine_pcgrad(&g, &mut rng).d;
        let b = combine_pcgrad(&g, &mut ChaCha8Rng::seed_from_u64(case as u64 + 12345)).d;
        let (g1, g2) = (g.row(0), g.row(1));
        let mut p1 = g1.to_vec();
        let mut p2 = g2.to_vec();
        let d12 = dot(g1, g2);
        if d12 < 0.0 {
            let n2 = dot(g2, g2);
            let n1 = dot(g1, g1);
            p1.iter_mut().zip(g2).for_each(|(x, y)| *x -= d12 / n2 * y);
            p2.iter_mut().zip(g1).for_each(|(x, y)| *x -= d12 / n1 * y);
        }
        Ok(vec![
            (bit_mismatch(&a, &b), 0.5),
            (-dot(&p1, g2), 1e-12),
            (-dot(&p2, g1), 1e-12),
        ])
    });
    summarize("pcgrad_pair", results, scale)
}

/// Scaling every gradient by s > 0 scales mean, MGDA and CAGrad by s.
pub fn scale_equivariance(seed: u64, trials: usize, scale: f64, exec: Execution) -> Result<PropertyOutcome> {
    let st = SolverSettings::default();
    let results = exec.map_range(trials, |case| {
        let mut rng = case_rng(seed, 11, case);
        let k = rng.random_range(2..=4);
        let m = rng.random_range(2..=5);
        let g = gaussian_rows(&mut rng, k, m);
        let s = rng.random_range(0.1..10.0);
        let gs = g.scaled(s);
        // for c ≥ 1 with the origin inside the hull, d jumps between g0 and
        // g0 + c‖g0‖·u for an arbitrary unit u, so only c < 1 is compared
        let c = rng.random_range(0.0..1.0);
        let pairs = [
            (combine_mean(&g).d, combine_mean(&gs).d),
            (combine_mgda(&g, &st)?.d, combine_mgda(&gs, &st)?.d),
            (combine_cagrad(&g, c, &st)?.d, combine_cagrad(&gs, c, &st)?.d),
        ];
        Ok(pairs
            .iter()
            .map(|(d, ds)| {
                let diff: Vec<f64> = d.iter().zip(ds).map(|(a, b)| s * a - b).collect();
                (norm(&diff), 1e-6 * (1.0 + norm(ds)))
            })
            .collect())
    });
    summarize("scale_equivariance", results, scale)
}

fn cosine(a: &[f64], b: &[f64]) -> f64 {
    dot(a, b) / (norm(a) * norm(b))
}

/// Points on the toy landscape with pareto_stationarity above 0.05, sampled
/// uniformly from [−10, 10]².
pub fn toy_points(seed: u64, count: usize) -> Result<Vec<Vec<f64>>> {
    let toy = toy_two_task();
    let s = SolverSettings::default();
    let mut rng = case_rng(seed, 12, 0);
    let mut out = Vec::with_capacity(count);
    let mut attempts = 0;
    while out.len() < count {
        attempts += 1;
        if attempts > 1000 * count.max(1) {
            return Err(Error::NumericalDegeneracy(
                "could not find enough non-stationary toy points".into(),
            ));
        }
        let theta = vec![rng.random_range(-10.0..10.0), rng.random_range(-10.0..10.0)];
        let Ok(g) = toy.gradients(&ParamVector::new(theta.clone())?) else {
            continue;
        };
        if pareto_stationarity(&g, &s)? > 0.05 {
            out.push(theta);
        }
    }
    Ok(out)
}

/// Large c points CAGrad along the MGDA direction.
pub fn mgda_limit(seed: u64, points: usize, scale: f64, exec: Execution) -> Result<PropertyOutcome> {
    let toy = toy_two_task();
    let s = SolverSettings::default();
    let pts = toy_points(seed, points)?;
    let results = exec.map(&pts, |_, theta| {
        let g = toy.gradients(&ParamVector::new(theta.clone())?)?;
        let cos = cosine(&combine_cagrad(&g, 100.0, &s)?.d, &combine_mgda(&g, &s)?.d);
        Ok(vec![(0.99 - cos, 0.0)])
    });
    summarize("mgda_limit", results, scale)
}

/// Forward-mode toy gradients against central differences at smooth points.
pub fn toy_gradient_check(seed: u64, points: usize, scale: f64, exec: Execution) -> Result<PropertyOutcome> {
    let toy = toy_two_task();
    let results = exec.map_range(points, |case| {
        let mut rng = case_rng(seed, 13, case);
        // stay off the kinks: the gates switch at x2 = 0 and the log floor
        // is active only within 5e-6 of the abs zero set
        let theta = loop {
            let t: Vec<f64> = vec![rng.random_range(-10.0..10.0), rng.random_range(-10.0..10.0)];
            let a1 = (0.5 * (-t[0] - 7.0) - (-t[1]).tanh()).abs();
            let a2 = (0.5 * (-t[0] + 3.0) - (-t[1]).tanh() + 2.0).abs();
            if t[1].abs() > 0.05 && a1 > 1e-2 && a2 > 1e-2 {
                break t;
            }
        };
        let g = toy.gradients(&ParamVector::new(theta.clone())?)?;
        let h = 1e-6;
        let mut out = Vec::new();
        for j in 0..2 {
            let mut up = theta.clone();
            let mut dn = theta.clone();
            up[j] += h;
            dn[j] -= h;
            let lu = toy.losses(&ParamVector::new(up)?)?;
            let ld = toy.losses(&ParamVector::new(dn)?)?;
            for i in 0..2 {
                let fd = (lu[i] - ld[i]) / (2.0 * h);
                let ad = g.row(i)[j];
                out.push(((fd - ad).abs(), 1e-5 * ad.abs().max(1.0)));
            }
        }
        Ok(out)
    });
    summarize("toy_gradient_check", results, scale)
}

/// Manual backpropagation of the shared-trunk network against central
/// differences over every parameter.
pub fn mlp_gradient_check(seed: u64, problems: usize, scale: f64, exec: Execution) -> Result<PropertyOutcome> {
    let results = exec.map_range(problems, |case| {
        let p = mlp_synth(seed.wrapping_add(case as u64), 4, 12)?;
        let theta = p.default_init().expect("mlp has an init").into_vec();
        let (_, grads) = p.full_gradients(&ParamVector::new(theta.clone())?)?;
        let h = 1e-6;
        let mut out = Vec::new();
        for j in 0..theta.len() {
            let mut up = theta.clone();
            let mut dn = theta.clone();
            up[j] += h;
            dn[j] -= h;
            let lu = p.losses(&ParamVector::new(up)?)?;
            let ld = p.losses(&ParamVector::new(dn)?)?;
            for (i, gi) in grads.iter().enumerate() {
                let fd = (lu[i] - ld[i]) / (2.0 * h);
                out.push(((fd - gi[j]).abs(), 1e-5 * gi[j].abs().max(1.0)));
            }
        }
        Ok(out)
    });
    summarize("mlp_gradient_check", results, scale)
}

/// Runs the full suite in a fixed order.
pub fn run_suite(opts: &VerifyOptions) -> Result<Vec<PropertyOutcome>> {
    if opts.trials == 0 {
        return Err(Error::invalid("trials must be at least 1"));
    }
    let (seed, n, sc, ex) = (opts.seed, opts.trials, opts.tolerance_scale, opts.execution);
    Ok(vec![
        strong_duality(seed, n, 2049, sc, ex)?,
        feasibility(seed, n, sc, ex)?,
        d_reconstruction(seed, n, sc, ex)?,
        descent_inequality(seed, n, sc, ex)?,
        telescoped_bound(seed, n, sc, ex)?,
        minnorm_dominance(seed, n, sc, ex)?,
        projection_optimality(seed, n, sc, ex)?,
        dual_convexity(seed, n, sc, ex)?,
        exact_reductions(seed, n, sc, ex)?,
        pcgrad_pair(seed, n, sc, ex)?,
        scale_equivariance(seed, n, sc, ex)?,
        mgda_limit(seed, n.min(100), sc, ex)?,
        toy_gradient_check(seed, n.min(100), sc, ex)?,
        mlp_gradient_check(seed, n.clamp(1, 5), sc, ex)?,
    ])
}

/// Fixed-step CAGrad on a quadratic, with the quantities of the c < 1
/// convergence bound.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FixedStepReport {
    /// Σ_{t=0}^{T} ‖∇L0(θ_t)‖².
    pub gradient_sum: f64,
    /// 2(L0(θ0) − L0*)/(α(1 − c²)).
    pub bound: f64,
    /// max_t of L0(θ_{t+1}) − L0(θ_t) + (α/2)(1 − c²)‖g0(θ_t)‖².
    pub worst_step_excess: f64,
    pub final_theta: Vec<f64>,
}

fn quadratic_config(
    anchors: Vec<Vec<f64>>,
    init: Vec<f64>,
    method: CombinerSpec,
    stepper: StepperSpec,
    steps: u64,
) -> ExperimentConfig {
    ExperimentConfig {
        problem: ProblemSpec::Quadratic(crate::harness::QuadraticSpec { quadratic: anchors }),
        method,
        stepper,
        steps,
        inits: vec![init],
        seed: 0,
        log_every: 1,
        output_path: None,
    }
}

fn traced_run(cfg: &ExperimentConfig) -> Result<(Vec<StepTrace>, crate::harness::Trajectory, Box<dyn Problem>)> {
    let (problem, inits) = cfg.resolve()?;
    let mut trace = Vec::new();
    let tr = run_single(cfg, problem.as_ref(), 0, &inits[0], Some(&mut trace))?;
    if tr.summary.diverged {
        return Err(Error::NumericalDegeneracy(format!(
            "run diverged: {:?}",
            tr.summary.divergence
        )));
    }
    Ok((trace, tr, problem))
}

pub fn fixed_step_run(
    anchors: Vec<Vec<f64>>,
    init: Vec<f64>,
    c: f64,
    alpha: f64,
    steps: u64,
) -> Result<FixedStepReport> {
    if !(0.0..1.0).contains(&c) {
        return Err(Error::invalid("the fixed-step bound needs 0 ≤ c < 1"));
    }
    let cfg = quadratic_config(
        anchors,
        init,
        CombinerSpec::cagrad(c),
        StepperSpec::Fixed { lr: alpha },
        steps,
    );
    let (_, tr, problem) = traced_run(&cfg)?;
    let rows = &tr.rows;
    let l_star = problem.average_loss_optimum().expect("quadratic optimum is known");
    let gradient_sum = rows.iter().map(|r| r.g0_norm * r.g0_norm).sum();
    let worst_step_excess = rows
        .windows(2)
        .map(|w| w[1].l0 - w[0].l0 + 0.5 * alpha * (1.0 - c * c) * w[0].g0_norm * w[0].g0_norm)
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(FixedStepReport {
        gradient_sum,
        bound: 2.0 * (rows[0].l0 - l_star) / (alpha * (1.0 - c * c)),
        worst_step_excess,
        final_theta: tr.summary.final_theta,
    })
}

/// CAGrad with c > 1 and the equality step size on a quadratic.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecayingReport {
    /// Σ_t α_t ‖g0(θ_t)‖ ‖g_w*(θ_t)‖ over the T steps taken.
    pub weighted_sum: f64,
    /// 2 minᵢ(Lᵢ(θ0) − Lᵢ(θ_T))/(c − 1).
    pub bound: f64,
    pub initial_losses: Vec<f64>,
    pub final_losses: Vec<f64>,
}

pub fn decaying_step_run(anchors: Vec<Vec<f64>>, init: Vec<f64>, c: f64, steps: u64) -> Result<DecayingReport> {
    let cfg = quadratic_config(
        anchors,
        init,
        CombinerSpec::cagrad(c),
        StepperSpec::Decaying { h: None },
        steps,
    );
    let (trace, tr, _) = traced_run(&cfg)?;
    let first = tr.rows.first().expect("step 0 is logged").losses.clone();
    let last = tr.summary.final_losses.clone();
    let min_drop = first
        .iter()
        .zip(&last)
        .map(|(a, b)| a - b)
        .fold(f64::INFINITY, f64::min);
    Ok(DecayingReport {
        weighted_sum: trace.iter().map(|t| t.alpha * t.g0_norm * t.gw_norm).sum(),
        bound: 2.0 * min_drop / (c - 1.0),
        initial_losses: first,
        final_losses: last,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_suite_passes() {
        let opts = VerifyOptions {
            trials: 5,
            ..VerifyOptions::default()
        };
        for o in run_suite(&opts).unwrap() {
            assert!(o.passed, "{o}");
        }
    }

    #[test]
    fn zero_trials_rejected() {
        let opts = VerifyOptions {
            trials: 0,
            ..VerifyOptions::default()
        };
        assert!(run_suite(&opts).is_err());
    }

    #[test]
    fn zero_scale_fails() {
        let o = strong_duality(0, 3, 65, 0.0, Execution::Sequential).unwrap();
        assert!(!o.passed);
    }

    #[test]
    fn fixed_step_example() {
        let r = fixed_step_run(vec![vec![1.0, 0.0], vec![-1.0, 0.0]], vec![3.0, 4.0], 0.5, 1.0, 80).unwrap();
        assert!((r.bound - 33.333333333333336).abs() < 1e-9);
        assert!(r.gradient_sum <= 33.34);
        assert!(r.worst_step_excess <= 1e-10);
    }
}
