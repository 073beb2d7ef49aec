//! Update-vector constructors. Each takes the per-task gradients at the
//! current parameters and returns the direction d for θ ← θ − αd.

use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gradcore::{dot, gram_and_bias, norm, CombineResult, TaskGradients};
use crate::solvers::{solve_cagrad_weights, solve_minnorm_weights, SolverSettings};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// Plain average gradient (GD).
    #[serde(alias = "gd")]
    Mean,
    Mgda,
    Pcgrad,
    Cagrad,
    CagradFast,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Mean => "mean",
            Method::Mgda => "mgda",
            Method::Pcgrad => "pcgrad",
            Method::Cagrad => "cagrad",
            Method::CagradFast => "cagrad_fast",
        }
    }
}

impl std::str::FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mean" | "gd" => Ok(Method::Mean),
            "mgda" => Ok(Method::Mgda),
            "pcgrad" => Ok(Method::Pcgrad),
            "cagrad" => Ok(Method::Cagrad),
            "cagrad_fast" | "cagrad-fast" => Ok(Method::CagradFast),
            other => Err(Error::invalid(format!("unknown method `{other}`"))),
        }
    }
}

/// Which combiner to run and with what hyper-parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CombinerSpec {
    pub method: Method,
    #[serde(default)]
    pub c: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub subsample: Option<usize>,
    #[serde(default)]
    pub solver: SolverSettings,
}

impl CombinerSpec {
    pub fn new(method: Method) -> Self {
        CombinerSpec {
            method,
            c: 0.0,
            subsample: None,
            solver: SolverSettings::default(),
        }
    }

    pub fn cagrad(c: f64) -> Self {
        CombinerSpec {
            c,
            ..Self::new(Method::Cagrad)
        }
    }

    pub fn cagrad_fast(c: f64, subsample: usize) -> Self {
        CombinerSpec {
            c,
            subsample: Some(subsample),
            ..Self::new(Method::CagradFast)
        }
    }

    /// c ≥ 1 gives up the average-loss guarantee; fixed points are only
    /// Pareto-stationary.
    pub fn pareto_stationary_mode(&self) -> bool {
        matches!(self.method, Method::Cagrad | Method::CagradFast) && self.c >= 1.0
    }

    pub fn validate(&self, tasks: Option<usize>) -> Result<()> {
        if !(self.c >= 0.0) || !self.c.is_finite() {
            return Err(Error::invalid(format!(
                "c must be finite and nonnegative, got {}",
                self.c
            )));
        }
        self.solver.validate()?;
        if self.method == Method::CagradFast {
            let sub = self
                .subsample
                .ok_or_else(|| Error::invalid("cagrad_fast requires `subsample`"))?;
            if sub < 1 {
                return Err(Error::invalid("subsample must be at least 1"));
            }
            if let Some(k) = tasks {
                if sub > k {
                    return Err(Error::invalid(format!("subsample {sub} exceeds the task count {k}")));
                }
            }
        }
        Ok(())
    }

    /// Runs the configured combiner. `rng` is advanced only by PCGrad and
    /// CAGrad-Fast.
    pub fn combine<R: Rng + ?Sized>(&self, g: &TaskGradients, rng: &mut R) -> Result<CombineResult> {
        match self.method {
            Method::Mean => Ok(combine_mean(g)),
            Method::Mgda => combine_mgda(g, &self.solver),
            Method::Pcgrad => Ok(combine_pcgrad(g, rng)),
            Method::Cagrad => combine_cagrad(g, self.c, &self.solver),
            Method::CagradFast => {
                let sub = self
                    .subsample
                    .ok_or_else(|| Error::invalid("cagrad_fast requires `subsample`"))?;
                combine_cagrad_fast(g, self.c, sub, rng, &self.solver)
            }
        }
    }
}

/// d = g0.
pub fn combine_mean(g: &TaskGradients) -> CombineResult {
    let d = g.average().to_vec();
    let dual = g.rows().map(|r| dot(r, &d)).fold(f64::INFINITY, f64::min);
    CombineResult::with_diagnostics(g, d, None, None, 0.0, dual)
}

/// d = the min-norm element of the convex hull of the gradients. The dual
/// value reported is ½‖d‖².
pub fn combine_mgda(g: &TaskGradients, s: &SolverSettings) -> Result<CombineResult> {
    let gb = gram_and_bias(g);
    let w = solve_minnorm_weights(&gb.gram, s)?;
    let d = g.combine(w.as_slice());
    let half_sq = 0.5 * dot(&d, &d);
    Ok(CombineResult::with_diagnostics(g, d, Some(w), None, 0.0, half_sq))
}

/// PCGrad: each gradient is projected off every other gradient it conflicts
/// with, visiting the others in a fresh random order, then averaged.
pub fn combine_pcgrad<R: Rng + ?Sized>(g: &TaskGradients, rng: &mut R) -> CombineResult {
    let k = g.tasks();
    let sq_norms: Vec<f64> = g.rows().map(|r| dot(r, r)).collect();
    let mut d = vec![0.0; g.dim()];
    let mut order: Vec<usize> = Vec::with_capacity(k.saturating_sub(1));
    for i in 0..k {
        let mut pc = g.row(i).to_vec();
        order.clear();
        order.extend((0..k).filter(|&j| j != i));
        order.shuffle(rng);
        for &j in &order {
            // zero gradient: nothing to conflict with
            if sq_norms[j] == 0.0 {
                continue;
            }
            let gj = g.row(j);
            let proj = dot(&pc, gj);
            if proj < 0.0 {
                let f = proj / sq_norms[j];
                pc.iter_mut().zip(gj).for_each(|(p, x)| *p -= f * x);
            }
        }
        d.iter_mut().zip(&pc).for_each(|(a, p)| *a += p);
    }
    let kf = k as f64;
    d.iter_mut().for_each(|x| *x /= kf);
    let dual = g.rows().map(|r| dot(r, &d)).fold(f64::INFINITY, f64::min);
    CombineResult::with_diagnostics(g, d, None, None, 0.0, dual)
}

/// CAGrad: d = g0 + √φ/‖g_{w*}‖ · g_{w*}, with w* minimizing the dual F.
pub fn combine_cagrad(g: &TaskGradients, c: f64, s: &SolverSettings) -> Result<CombineResult> {
    if !(c >= 0.0) || !c.is_finite() {
        return Err(Error::invalid(format!("c must be finite and nonnegative, got {c}")));
    }
    if c == 0.0 {
        return Ok(combine_mean(g));
    }
    cagrad_around_center(g, c, s)
}

/// The CAGrad step for a gradient set whose cached center is the true g0
/// (pseudo sets from subsampling included).
fn cagrad_around_center(g: &TaskGradients, c: f64, s: &SolverSettings) -> Result<CombineResult> {
    let g0 = g.average();
    let g0_norm = norm(g0);
    let sqrt_phi = c * g0_norm;
    let phi = sqrt_phi * sqrt_phi;
    let gb = gram_and_bias(g);
    let sol = solve_cagrad_weights(&gb, g0_norm, c, s)?;
    let gw = g.combine(sol.weights.as_slice());
    let gw_norm = norm(&gw);
    let (d, lambda) = if sol.lambda_star.is_none() || gw_norm == 0.0 {
        (g0.to_vec(), None)
    } else {
        let scale = sqrt_phi / gw_norm;
        let d = g0.iter().zip(&gw).map(|(a, b)| a + scale * b).collect();
        (d, Some(gw_norm / sqrt_phi))
    };
    Ok(CombineResult::with_diagnostics(
        g,
        d,
        Some(sol.weights),
        lambda,
        phi,
        sol.value,
    ))
}

/// CAGrad over a task subset S: the dual runs on {gᵢ : i ∈ S} plus the
/// complement average (K·g0 − Σ_S gᵢ)/(K − |S|), with the true g0 as the
/// ball center. `subset` indices are 0-based; order is kept.
pub fn cagrad_on_subset(g: &TaskGradients, c: f64, subset: &[usize], s: &SolverSettings) -> Result<CombineResult> {
    let k = g.tasks();
    if subset.is_empty() || subset.len() > k || subset.iter().any(|&i| i >= k) {
        return Err(Error::invalid("subset must be nonempty with indices below K"));
    }
    if !(c >= 0.0) || !c.is_finite() {
        return Err(Error::invalid(format!("c must be finite and nonnegative, got {c}")));
    }
    let g0 = g.average();
    let mut rows: Vec<Vec<f64>> = subset.iter().map(|&i| g.row(i).to_vec()).collect();
    if subset.len() < k {
        let rest = (k - subset.len()) as f64;
        let kf = k as f64;
        let mut comp: Vec<f64> = g0.iter().map(|x| kf * x).collect();
        for r in &rows {
            comp.iter_mut().zip(r).for_each(|(a, b)| *a -= b);
        }
        comp.iter_mut().for_each(|x| *x /= rest);
        rows.push(comp);
    }
    let pseudo = TaskGradients::with_center(rows, g0.to_vec());
    let inner = if c == 0.0 {
        combine_mean(&pseudo)
    } else {
        cagrad_around_center(&pseudo, c, s)?
    };
    // Diagnostics against the real task gradients; weights stay over the
    // pseudo set (subset rows first, complement last).
    Ok(CombineResult::with_diagnostics(
        g,
        inner.d,
        inner.weights,
        inner.lambda_star,
        inner.phi,
        inner.dual_value,
    ))
}

/// CAGrad-Fast: draws `subsample` tasks uniformly without replacement and
/// solves the subset dual. |S| = K reproduces [`combine_cagrad`] exactly.
pub fn combine_cagrad_fast<R: Rng + ?Sized>(
    g: &TaskGradients,
    c: f64,
    subsample: usize,
    rng: &mut R,
    s: &SolverSettings,
) -> Result<CombineResult> {
    let k = g.tasks();
    if subsample < 1 || subsample > k {
        return Err(Error::invalid(format!(
            "subsample must lie in [1, {k}], got {subsample}"
        )));
    }
    let subset = sample_subset(k, subsample, rng);
    if subset.len() == k {
        return combine_cagrad(g, c, s);
    }
    cagrad_on_subset(g, c, &subset, s)
}

/// Uniform draw of `size` distinct task indices, returned sorted.
pub fn sample_subset<R: Rng + ?Sized>(k: usize, size: usize, rng: &mut R) -> Vec<usize> {
    let all: Vec<usize> = (0..k).collect();
    let mut subset: Vec<usize> = all.choose_multiple(rng, size).copied().collect();
    subset.sort_unstable();
    subset
}
