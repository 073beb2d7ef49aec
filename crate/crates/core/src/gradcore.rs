//! Core numeric types shared by every combiner and solver: parameter
//! vectors, per-task gradient matrices, simplex weights and the combined
//! update with its diagnostics.

use crate::error::{Error, Result};

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn all_finite(v: &[f64]) -> bool {
    v.iter().all(|x| x.is_finite())
}

/// A point θ in parameter space.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamVector(Vec<f64>);

impl ParamVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::invalid("parameter vector must have at least one entry"));
        }
        if !all_finite(&values) {
            return Err(Error::invalid("parameter vector has a non-finite entry"));
        }
        Ok(ParamVector(values))
    }

    /// Skips validation; callers in the harness check finiteness per step.
    pub(crate) fn from_vec_unchecked(values: Vec<f64>) -> Self {
        ParamVector(values)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn is_finite(&self) -> bool {
        all_finite(&self.0)
    }
}

impl std::ops::Index<usize> for ParamVector {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

/// K task gradients over m shared parameters, stored row-major, with the
/// average gradient g0 cached at construction.
#[derive(Debug, Clone, PartialEq)]
pub struct TaskGradients {
    data: Vec<f64>,
    g0: Vec<f64>,
    tasks: usize,
    dim: usize,
}

impl TaskGradients {
    /// Builds from per-task rows and computes the average gradient.
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        let tasks = rows.len();
        if tasks == 0 {
            return Err(Error::invalid("need at least one task gradient"));
        }
        let dim = rows[0].len();
        if dim == 0 {
            return Err(Error::invalid("gradients must have at least one coordinate"));
        }
        let mut data = Vec::with_capacity(tasks * dim);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != dim {
                return Err(Error::invalid(format!(
                    "gradient row {} has length {}, expected {}",
                    i + 1,
                    row.len(),
                    dim
                )));
            }
            if !all_finite(row) {
                return Err(Error::invalid(format!("gradient row {} has a non-finite entry", i + 1)));
            }
            data.extend_from_slice(row);
        }
        Ok(Self::from_flat(data, tasks, dim))
    }

    fn from_flat(data: Vec<f64>, tasks: usize, dim: usize) -> Self {
        let mut g0 = vec![0.0; dim];
        for row in data.chunks_exact(dim) {
            for (acc, x) in g0.iter_mut().zip(row) {
                *acc += x;
            }
        }
        let k = tasks as f64;
        g0.iter_mut().for_each(|x| *x /= k);
        TaskGradients { data, g0, tasks, dim }
    }

    /// Builds a gradient set around an externally supplied center. Used for
    /// pseudo-gradient sets whose rows do not average to the true g0.
    pub(crate) fn with_center(rows: Vec<Vec<f64>>, g0: Vec<f64>) -> Self {
        let tasks = rows.len();
        let dim = g0.len();
        let data = rows.into_iter().flatten().collect();
        TaskGradients { data, g0, tasks, dim }
    }

    pub fn tasks(&self) -> usize {
        self.tasks
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.data.chunks_exact(self.dim)
    }

    /// The cached average gradient g0.
    pub fn average(&self) -> &[f64] {
        &self.g0
    }

    /// g_w = Σ wᵢ gᵢ.
    pub fn combine(&self, w: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        for (wi, row) in w.iter().zip(self.rows()) {
            for (o, g) in out.iter_mut().zip(row) {
                *o += wi * g;
            }
        }
        out
    }

    /// Multiplies every gradient by `s`.
    pub fn scaled(&self, s: f64) -> Self {
        Self::from_flat(self.data.iter().map(|x| x * s).collect(), self.tasks, self.dim)
    }
}

/// A point on the probability simplex.
#[derive(Debug, Clone, PartialEq)]
pub struct SimplexWeights(Vec<f64>);

impl SimplexWeights {
    pub const SUM_TOL: f64 = 1e-12;

    pub fn new(w: Vec<f64>) -> Result<Self> {
        if w.is_empty() {
            return Err(Error::invalid("simplex weights must be nonempty"));
        }
        if !w.iter().all(|x| x.is_finite() && *x >= 0.0) {
            return Err(Error::invalid("simplex weights must be finite and nonnegative"));
        }
        if (w.iter().sum::<f64>() - 1.0).abs() > Self::SUM_TOL {
            return Err(Error::invalid("simplex weights must sum to one"));
        }
        Ok(SimplexWeights(w))
    }

    pub fn uniform(k: usize) -> Self {
        SimplexWeights(vec![1.0 / k as f64; k])
    }

    pub fn vertex(k: usize, i: usize) -> Self {
        let mut w = vec![0.0; k];
        w[i] = 1.0;
        SimplexWeights(w)
    }

    pub(crate) fn from_vec_unchecked(w: Vec<f64>) -> Self {
        SimplexWeights(w)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// The update vector chosen by a combiner together with the quantities the
/// harness logs.
#[derive(Debug, Clone, PartialEq)]
pub struct CombineResult {
    pub d: Vec<f64>,
    /// Optimal simplex weights, for methods that solve over the simplex.
    pub weights: Option<SimplexWeights>,
    /// Ball-constraint multiplier λ*. `None` stands for the unbounded
    /// multiplier (φ = 0 or a vanishing g_w*), in which case d = g0.
    pub lambda_star: Option<f64>,
    /// φ = c²‖g0‖².
    pub phi: f64,
    /// Value of the method's dual objective at its solution.
    pub dual_value: f64,
    /// minᵢ ⟨gᵢ, d⟩.
    pub min_dot: f64,
    /// ‖d − g0‖.
    pub constraint_norm: f64,
}

impl CombineResult {
    /// Fills `min_dot` and `constraint_norm` from `d`.
    pub(crate) fn with_diagnostics(
        g: &TaskGradients,
        d: Vec<f64>,
        weights: Option<SimplexWeights>,
        lambda_star: Option<f64>,
        phi: f64,
        dual_value: f64,
    ) -> Self {
        let min_dot = g.rows().map(|r| dot(r, &d)).fold(f64::INFINITY, f64::min);
        let constraint_norm = d
            .iter()
            .zip(g.average())
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        CombineResult {
            d,
            weights,
            lambda_star,
            phi,
            dual_value,
            min_dot,
            constraint_norm,
        }
    }

    /// ‖g_{w*}‖ recovered from λ* = ‖g_{w*}‖/√φ; zero for the unbounded case.
    pub fn gw_norm(&self) -> f64 {
        match self.lambda_star {
            Some(l) => l * self.phi.sqrt(),
            None => 0.0,
        }
    }
}

/// (1/K) Σᵢ gᵢ.
pub fn average_gradient(g: &TaskGradients) -> Vec<f64> {
    g.average().to_vec()
}

/// First-order conflict measure −minᵢ⟨gᵢ, d⟩. Negative means every task
/// loss decreases along θ − αd for small α.
pub fn conflict_measure(g: &TaskGradients, d: &[f64]) -> Result<f64> {
    if d.len() != g.dim() {
        return Err(Error::invalid(format!(
            "direction has length {}, gradients have {}",
            d.len(),
            g.dim()
        )));
    }
    if !all_finite(d) {
        return Err(Error::invalid("direction has a non-finite entry"));
    }
    Ok(-g.rows().map(|r| dot(r, d)).fold(f64::INFINITY, f64::min))
}

/// The K×K Gram matrix M = GGᵀ and bias bᵢ = ⟨gᵢ, g0⟩. All simplex solver
/// work runs on these, independent of the parameter dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct GramBias {
    pub gram: Vec<Vec<f64>>,
    pub bias: Vec<f64>,
}

impl GramBias {
    pub fn tasks(&self) -> usize {
        self.bias.len()
    }

    /// wᵀMw.
    pub fn quad(&self, w: &[f64]) -> f64 {
        quad_form(&self.gram, w)
    }
}

pub(crate) fn quad_form(m: &[Vec<f64>], w: &[f64]) -> f64 {
    m.iter().zip(w).map(|(row, wi)| wi * dot(row, w)).sum()
}

pub fn gram_and_bias(g: &TaskGradients) -> GramBias {
    let k = g.tasks();
    let mut gram = vec![vec![0.0; k]; k];
    for i in 0..k {
        for j in i..k {
            let v = dot(g.row(i), g.row(j));
            gram[i][j] = v;
            gram[j][i] = v;
        }
    }
    let bias = g.rows().map(|r| dot(r, g.average())).collect();
    GramBias { gram, bias }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tg(rows: &[&[f64]]) -> TaskGradients {
        TaskGradients::new(rows.iter().map(|r| r.to_vec()).collect()).unwrap()
    }

    #[test]
    fn average_examples() {
        assert_eq!(average_gradient(&tg(&[&[1.0, 0.0], &[0.0, 1.0]])), vec![0.5, 0.5]);
        assert_eq!(average_gradient(&tg(&[&[2.0, 2.0]])), vec![2.0, 2.0]);
        assert_eq!(average_gradient(&tg(&[&[1.0, 0.0], &[-1.0, 0.0]])), vec![0.0, 0.0]);
    }

    #[test]
    fn rejects_non_finite_and_ragged() {
        assert!(TaskGradients::new(vec![vec![f64::NAN, 0.0]]).is_err());
        assert!(TaskGradients::new(vec![vec![1.0, 0.0], vec![1.0]]).is_err());
        assert!(TaskGradients::new(vec![]).is_err());
        assert!(ParamVector::new(vec![f64::INFINITY]).is_err());
        assert!(ParamVector::new(vec![]).is_err());
    }

    #[test]
    fn conflict_examples() {
        let g = tg(&[&[1.0, 0.0], &[0.0, 1.0]]);
        assert_eq!(conflict_measure(&g, &[0.0, 0.0]).unwrap(), 0.0);
        assert_eq!(conflict_measure(&g, &[1.0, 1.0]).unwrap(), -1.0);
        assert_eq!(conflict_measure(&g, &[1.0, -1.0]).unwrap(), 1.0);
        assert!(conflict_measure(&g, &[1.0]).is_err());
    }

    #[test]
    fn gram_examples() {
        let gb = gram_and_bias(&tg(&[&[1.0, 0.0], &[0.0, 1.0]]));
        assert_eq!(gb.gram, vec![vec![1.0, 0.0], vec![0.0, 1.0]]);
        assert_eq!(gb.bias, vec![0.5, 0.5]);

        let gb = gram_and_bias(&tg(&[&[2.0, 0.0]]));
        assert_eq!(gb.gram, vec![vec![4.0]]);
        assert_eq!(gb.bias, vec![4.0]);

        let gb = gram_and_bias(&tg(&[&[1.0, 1.0], &[1.0, -1.0]]));
        assert_eq!(gb.gram, vec![vec![2.0, 0.0], vec![0.0, 2.0]]);
        // ⟨(1,1),(1,0)⟩ = ⟨(1,−1),(1,0)⟩ = 1
        assert_eq!(gb.bias, vec![1.0, 1.0]);
    }

    #[test]
    fn simplex_weights_validation() {
        assert!(SimplexWeights::new(vec![0.5, 0.5]).is_ok());
        assert!(SimplexWeights::new(vec![0.5, 0.6]).is_err());
        assert!(SimplexWeights::new(vec![1.5, -0.5]).is_err());
    }
}
