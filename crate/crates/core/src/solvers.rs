//! Solvers over the probability simplex.
//!
//! Everything here works on the Gram matrix M = GGᵀ and the bias
//! bᵢ = ⟨gᵢ, g0⟩ (see [`gram_and_bias`]), so the cost is independent of the
//! parameter dimension once those are formed. The CAGrad dual objective is
//!
//! ```text
//! F(w) = wᵀb + √φ · √(wᵀMw),   φ = c²‖g0‖²
//! ```
//!
//! and the MGDA dual is ½ wᵀMw. Two tasks are solved in closed form for
//! both; larger K use projected gradient descent with step halving.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::gradcore::{dot, gram_and_bias, norm, quad_form, GramBias, SimplexWeights, TaskGradients};

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverSettings {
    pub max_iters: usize,
    /// Stop once an accepted step moves every weight by less than this.
    pub tol: f64,
    /// Initial projected-gradient step; `None` means 1/trace(M).
    pub step: Option<f64>,
    /// ‖g_w‖ at or below this is treated as zero.
    pub zero_eps: f64,
}

impl Default for SolverSettings {
    fn default() -> Self {
        SolverSettings {
            max_iters: 200,
            tol: 1e-10,
            step: None,
            zero_eps: 1e-12,
        }
    }
}

impl SolverSettings {
    pub fn validate(&self) -> Result<()> {
        if self.max_iters < 1 {
            return Err(Error::invalid("solver max_iters must be at least 1"));
        }
        if !(self.tol > 0.0) {
            return Err(Error::invalid("solver tol must be positive"));
        }
        if !(self.zero_eps > 0.0) {
            return Err(Error::invalid("solver zero_eps must be positive"));
        }
        if let Some(step) = self.step {
            if !(step > 0.0 && step.is_finite()) {
                return Err(Error::invalid("solver step must be positive"));
            }
        }
        Ok(())
    }
}

/// Euclidean projection onto the probability simplex (sort-based).
pub fn project_to_simplex(v: &[f64]) -> Result<SimplexWeights> {
    if v.is_empty() {
        return Err(Error::invalid("cannot project an empty vector"));
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::invalid("cannot project a vector with non-finite entries"));
    }
    Ok(SimplexWeights::from_vec_unchecked(project_unchecked(v)))
}

fn project_unchecked(v: &[f64]) -> Vec<f64> {
    let mut sorted = v.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut cumsum = 0.0;
    let mut tau = 0.0;
    for (j, &u) in sorted.iter().enumerate() {
        cumsum += u;
        let t = (cumsum - 1.0) / (j + 1) as f64;
        if u - t > 0.0 {
            tau = t;
        }
    }
    v.iter().map(|x| (x - tau).max(0.0)).collect()
}

/// Solution of the CAGrad dual.
#[derive(Debug, Clone, PartialEq)]
pub struct CagradSolution {
    pub weights: SimplexWeights,
    /// `None` when the multiplier is unbounded (φ = 0 or ‖g_{w*}‖ counts as zero).
    pub lambda_star: Option<f64>,
    /// F(w*).
    pub value: f64,
    /// ‖g_{w*}‖.
    pub gw_norm: f64,
}

/// ‖g_w‖ at or below this counts as zero. The exact K ≤ 2 paths use
/// `zero_eps`. The iterative path only locates the kink of F at g_w = 0 to
/// roughly √tol relative to the largest task gradient, and the direction of
/// a g_w that small is noise.
pub(crate) fn gw_zero_threshold(gb: &GramBias, s: &SolverSettings) -> f64 {
    if gb.tasks() <= 2 {
        return s.zero_eps;
    }
    let largest = (0..gb.tasks()).map(|i| gb.gram[i][i]).fold(0.0, f64::max).sqrt();
    s.zero_eps.max(s.tol.sqrt() * largest)
}

/// F(w) evaluated from the Gram form.
pub fn cagrad_dual_objective(gb: &GramBias, sqrt_phi: f64, w: &[f64]) -> f64 {
    dot(w, &gb.bias) + sqrt_phi * gb.quad(w).max(0.0).sqrt()
}

/// Minimizes F over the simplex.
pub fn solve_cagrad_weights(gb: &GramBias, g0_norm: f64, c: f64, s: &SolverSettings) -> Result<CagradSolution> {
    if !(c >= 0.0) || !c.is_finite() {
        return Err(Error::invalid(format!("c must be finite and nonnegative, got {c}")));
    }
    if !(g0_norm >= 0.0) || !g0_norm.is_finite() {
        return Err(Error::invalid("g0 norm must be finite and nonnegative"));
    }
    s.validate()?;
    check_psd(&gb.gram)?;
    let k = gb.tasks();
    let sqrt_phi = c * g0_norm;

    let weights = if sqrt_phi == 0.0 {
        // F is linear: lowest-index vertex minimizing b.
        let mut best = 0;
        for i in 1..k {
            if gb.bias[i] < gb.bias[best] {
                best = i;
            }
        }
        SimplexWeights::vertex(k, best)
    } else if k == 1 {
        SimplexWeights::vertex(1, 0)
    } else if k == 2 {
        SimplexWeights::from_vec_unchecked(pair_weights(pair_cagrad(gb, sqrt_phi)))
    } else {
        let grad = |w: &[f64]| {
            let mw: Vec<f64> = gb.gram.iter().map(|row| dot(row, w)).collect();
            let gw = dot(w, &mw).max(0.0).sqrt();
            if gw <= s.zero_eps {
                gb.bias.clone()
            } else {
                gb.bias.iter().zip(&mw).map(|(b, m)| b + sqrt_phi * m / gw).collect()
            }
        };
        let obj = |w: &[f64]| cagrad_dual_objective(gb, sqrt_phi, w);
        SimplexWeights::from_vec_unchecked(projected_descent(obj, grad, k, initial_step(gb, s), s))
    };

    let gw_norm = gb.quad(weights.as_slice()).max(0.0).sqrt();
    let lambda_star = if sqrt_phi > 0.0 && gw_norm > gw_zero_threshold(gb, s) {
        Some(gw_norm / sqrt_phi)
    } else {
        None
    };
    let value = cagrad_dual_objective(gb, sqrt_phi, weights.as_slice());
    Ok(CagradSolution {
        weights,
        lambda_star,
        value,
        gw_norm,
    })
}

/// Minimizes ½‖g_w‖² = ½wᵀMw over the simplex.
pub fn solve_minnorm_weights(gram: &[Vec<f64>], s: &SolverSettings) -> Result<SimplexWeights> {
    s.validate()?;
    check_psd(gram)?;
    let k = gram.len();
    if k == 1 {
        return Ok(SimplexWeights::vertex(1, 0));
    }
    if k == 2 {
        // q(t) = t²M11 + 2t(1-t)M12 + (1-t)²M22
        let curvature = gram[0][0] - 2.0 * gram[0][1] + gram[1][1];
        let t = if curvature > 0.0 {
            ((gram[1][1] - gram[0][1]) / curvature).clamp(0.0, 1.0)
        } else {
            // g1 == g2: every convex combination is the same vector.
            0.5
        };
        return Ok(SimplexWeights::from_vec_unchecked(pair_weights(t)));
    }
    let trace: f64 = (0..k).map(|i| gram[i][i]).sum();
    if trace <= 0.0 {
        return Ok(SimplexWeights::uniform(k));
    }
    let obj = |w: &[f64]| 0.5 * quad_form(gram, w);
    let grad = |w: &[f64]| gram.iter().map(|row| dot(row, w)).collect::<Vec<_>>();
    let step = s.step.unwrap_or(1.0 / trace);
    Ok(SimplexWeights::from_vec_unchecked(projected_descent(
        obj, grad, k, step, s,
    )))
}

/// min over the simplex of ‖g_w‖; zero exactly when the origin lies in the
/// convex hull of the task gradients.
pub fn pareto_stationarity(g: &TaskGradients, s: &SolverSettings) -> Result<f64> {
    let gb = gram_and_bias(g);
    let w = solve_minnorm_weights(&gb.gram, s)?;
    Ok(norm(&g.combine(w.as_slice())))
}

fn pair_weights(t: f64) -> Vec<f64> {
    vec![t, 1.0 - t]
}

/// K = 2 minimizer of F along w = (t, 1 − t).
///
/// With q(t) = ‖g_w‖² = a t² + 2βt + γ and u = a t + β, a stationary point
/// solves u² (φ a − δ²) = δ² (aγ − β²) with sign(u) = −sign(δ), δ = b₁ − b₂.
/// The candidate is clipped to [0, 1] and compared with both endpoints.
fn pair_cagrad(gb: &GramBias, sqrt_phi: f64) -> f64 {
    let m = &gb.gram;
    let a = m[0][0] - 2.0 * m[0][1] + m[1][1];
    let beta = m[0][1] - m[1][1];
    let det = (m[0][0] * m[1][1] - m[0][1] * m[0][1]).max(0.0);
    let delta = gb.bias[0] - gb.bias[1];
    let f = |t: f64| cagrad_dual_objective(gb, sqrt_phi, &[t, 1.0 - t]);

    let mut candidates = Vec::with_capacity(3);
    let denom = sqrt_phi * sqrt_phi * a - delta * delta;
    if a > 0.0 && denom > 0.0 {
        let u = -delta.signum() * (delta * delta * det / denom).sqrt();
        candidates.push(((u - beta) / a).clamp(0.0, 1.0));
    }
    candidates.push(0.0);
    candidates.push(1.0);
    let mut best = (candidates[0], f(candidates[0]));
    for &t in &candidates[1..] {
        let v = f(t);
        if v < best.1 {
            best = (t, v);
        }
    }
    best.0
}

fn initial_step(gb: &GramBias, s: &SolverSettings) -> f64 {
    s.step.unwrap_or_else(|| {
        let trace: f64 = (0..gb.tasks()).map(|i| gb.gram[i][i]).sum();
        if trace > 0.0 {
            1.0 / trace
        } else {
            1.0
        }
    })
}

/// Projected gradient descent from the uniform weights. A step that fails
/// to decrease the objective is halved and retried; an accepted step lets
/// the next trial grow by 2×.
fn projected_descent(
    obj: impl Fn(&[f64]) -> f64,
    grad: impl Fn(&[f64]) -> Vec<f64>,
    k: usize,
    step0: f64,
    s: &SolverSettings,
) -> Vec<f64> {
    let mut w = vec![1.0 / k as f64; k];
    let mut fw = obj(&w);
    let mut step = step0;
    for _ in 0..s.max_iters {
        let gr = grad(&w);
        let mut accepted = false;
        while step > f64::MIN_POSITIVE {
            let trial: Vec<f64> = w.iter().zip(&gr).map(|(wi, gi)| wi - step * gi).collect();
            let cand = project_unchecked(&trial);
            let fc = obj(&cand);
            if fc < fw {
                let moved = w.iter().zip(&cand).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
                w = cand;
                fw = fc;
                accepted = true;
                if moved < s.tol {
                    return w;
                }
                step *= 2.0;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    w
}

/// Rejects matrices that are asymmetric or have a negative pivot beyond a
/// scale-relative tolerance (symmetric pivoted elimination).
pub(crate) fn check_psd(m: &[Vec<f64>]) -> Result<()> {
    let k = m.len();
    if m.iter().any(|row| row.len() != k) {
        return Err(Error::invalid("Gram matrix must be square"));
    }
    if m.iter().flatten().any(|x| !x.is_finite()) {
        return Err(Error::invalid("Gram matrix has a non-finite entry"));
    }
    let scale = m.iter().flatten().fold(1.0_f64, |a, x| a.max(x.abs()));
    let tol = 1e-10 * scale * k as f64;
    for i in 0..k {
        for j in 0..i {
            if (m[i][j] - m[j][i]).abs() > tol {
                return Err(Error::NumericalDegeneracy("Gram matrix is not symmetric".into()));
            }
        }
    }
    let mut a: Vec<Vec<f64>> = m.to_vec();
    let mut active: Vec<usize> = (0..k).collect();
    while !active.is_empty() {
        let (pos, &p) = active
            .iter()
            .enumerate()
            .max_by(|x, y| a[*x.1][*x.1].total_cmp(&a[*y.1][*y.1]))
            .expect("nonempty");
        let pivot = a[p][p];
        if pivot < -tol {
            return Err(Error::NumericalDegeneracy(
                "Gram matrix has a negative eigenvalue".into(),
            ));
        }
        if pivot <= tol {
            // Remaining block must vanish for a PSD matrix.
            for &i in &active {
                for &j in &active {
                    if a[i][j].abs() > tol.sqrt() * scale.sqrt() {
                        return Err(Error::NumericalDegeneracy(
                            "Gram matrix is not positive semidefinite".into(),
                        ));
                    }
                }
            }
            return Ok(());
        }
        active.remove(pos);
        for &i in &active {
            let f = a[i][p] / pivot;
            for &j in &active {
                a[i][j] -= f * a[p][j];
            }
        }
    }
    Ok(())
}

/// How the brute-force primal oracle explores the ball ‖d − g0‖ ≤ c‖g0‖.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OracleBudget {
    /// Tensor grid with `per_axis` points per coordinate (m ≤ 3). Axis points
    /// are nested across budgets, so the value never decreases as the budget
    /// grows; `per_axis = 2^j + 1` gives the uniform grid.
    Grid { per_axis: usize },
    /// The center followed by `samples − 1` uniform draws from the ball.
    Random { samples: usize, seed: u64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleResult {
    pub d: Vec<f64>,
    /// minᵢ ⟨gᵢ, d⟩ at the best point found.
    pub value: f64,
}

fn min_dot(g: &TaskGradients, d: &[f64]) -> f64 {
    g.rows().map(|r| dot(r, d)).fold(f64::INFINITY, f64::min)
}

/// First `n` points of the nested axis sequence 0, −1, 1, −½, ½, −¾, −¼, ¼, ¾, …
fn nested_axis(n: usize) -> Vec<f64> {
    let mut pts = Vec::with_capacity(n);
    pts.push(0.0);
    pts.push(-1.0);
    pts.push(1.0);
    let mut level_spacing = 1.0;
    while pts.len() < n {
        let count = (2.0 / level_spacing) as usize;
        for j in 0..count {
            pts.push(-1.0 + level_spacing / 2.0 + level_spacing * j as f64);
        }
        level_spacing /= 2.0;
    }
    pts.truncate(n);
    pts
}

/// Per-axis products radius·gᵢ[j]·axis[p], laid out as [(i·m + j)·n + p].
struct Grid<'a> {
    axis: &'a [f64],
    proj: Vec<f64>,
    tasks: usize,
    dim: usize,
}

impl<'a> Grid<'a> {
    fn new(g: &TaskGradients, axis: &'a [f64], radius: f64) -> Self {
        let (k, m, n) = (g.tasks(), g.dim(), axis.len());
        let mut proj = vec![0.0; k * m * n];
        for (i, row) in g.rows().enumerate() {
            for (j, gij) in row.iter().enumerate() {
                for (p, a) in axis.iter().enumerate() {
                    proj[(i * m + j) * n + p] = radius * gij * a;
                }
            }
        }
        Grid {
            axis,
            proj,
            tasks: k,
            dim: m,
        }
    }

    fn column(&self, i: usize, j: usize) -> &[f64] {
        let n = self.axis.len();
        &self.proj[(i * self.dim + j) * n..(i * self.dim + j + 1) * n]
    }

    /// Axis indices p with axis[p]² ≤ r2 (a contiguous range of the sorted axis).
    fn span(&self, r2: f64) -> std::ops::Range<usize> {
        let s = (r2 + 1e-12).max(0.0).sqrt();
        let lo = self.axis.partition_point(|a| *a < -s);
        let hi = self.axis.partition_point(|a| *a <= s);
        lo..hi
    }
}

/// Depth-first walk over the grid points inside the unit ball, carrying
/// partial inner products so each point costs O(K).
struct GridWalk<'a> {
    grid: &'a Grid<'a>,
    idx: Vec<usize>,
    best_value: f64,
    best_idx: Option<Vec<usize>>,
}

impl GridWalk<'_> {
    fn visit(&mut self, level: usize, partial: &[f64], r2: f64) {
        let grid = self.grid;
        let k = grid.tasks;
        let span = grid.span(r2);
        if level + 1 == grid.dim {
            let cols: Vec<&[f64]> = (0..k).map(|i| grid.column(i, level)).collect();
            for p in span {
                let mut v = f64::INFINITY;
                for i in 0..k {
                    v = v.min(partial[i] + cols[i][p]);
                }
                if v > self.best_value {
                    self.best_value = v;
                    self.idx[level] = p;
                    self.best_idx = Some(self.idx.clone());
                }
            }
            return;
        }
        let mut next = vec![0.0; k];
        for p in span {
            for i in 0..k {
                next[i] = partial[i] + grid.column(i, level)[p];
            }
            self.idx[level] = p;
            let a = grid.axis[p];
            self.visit(level + 1, &next, r2 - a * a);
        }
    }
}

/// Brute-force search for the CAGrad primal: maximize minᵢ⟨gᵢ, d⟩ subject
/// to ‖d − g0‖ ≤ c‖g0‖.
pub fn primal_oracle(g: &TaskGradients, c: f64, budget: OracleBudget) -> Result<OracleResult> {
    if !(c >= 0.0) || !c.is_finite() {
        return Err(Error::invalid("c must be finite and nonnegative"));
    }
    let g0 = g.average();
    let m = g.dim();
    let radius = c * norm(g0);
    let mut best = OracleResult {
        d: g0.to_vec(),
        value: min_dot(g, g0),
    };
    let mut consider = |d: &[f64]| {
        let v = min_dot(g, d);
        if v > best.value {
            best.value = v;
            best.d.copy_from_slice(d);
        }
    };
    match budget {
        OracleBudget::Grid { per_axis } => {
            if per_axis < 1 {
                return Err(Error::invalid("oracle budget must be at least 1"));
            }
            if m > 3 {
                return Err(Error::invalid("grid oracle supports at most 3 parameters"));
            }
            if radius == 0.0 {
                return Ok(best);
            }
            let mut axis = nested_axis(per_axis);
            axis.sort_by(f64::total_cmp);
            let grid = Grid::new(g, &axis, radius);
            let mut walk = GridWalk {
                grid: &grid,
                idx: vec![0; m],
                best_value: best.value,
                best_idx: None,
            };
            let bias: Vec<f64> = g.rows().map(|r| dot(r, g0)).collect();
            walk.visit(0, &bias, 1.0);
            if let Some(ix) = walk.best_idx {
                for ((dj, &p), c0) in best.d.iter_mut().zip(&ix).zip(g0) {
                    *dj = c0 + radius * axis[p];
                }
                best.value = min_dot(g, &best.d);
            }
        }
        OracleBudget::Random { samples, seed } => {
            if samples < 1 {
                return Err(Error::invalid("oracle budget must be at least 1"));
            }
            if radius == 0.0 {
                return Ok(best);
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut d = vec![0.0; m];
            for _ in 1..samples {
                let dir: Vec<f64> = (0..m).map(|_| rng.sample(StandardNormal)).collect();
                let n = norm(&dir);
                if n == 0.0 {
                    continue;
                }
                let r = radius * rng.random::<f64>().powf(1.0 / m as f64);
                for ((di, u), c0) in d.iter_mut().zip(&dir).zip(g0) {
                    *di = c0 + r * u / n;
                }
                consider(&d);
            }
        }
    }
    Ok(best)
}
