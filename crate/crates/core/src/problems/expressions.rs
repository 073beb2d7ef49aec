use super::{Evaluation, Problem};
use crate::error::{Error, Result};
use crate::expr::{eval, eval_dual, parse, Expr};
use crate::gradcore::{ParamVector, TaskGradients};

/// The two-task toy losses over (x1, x2).
pub const TOY_LOSSES: [&str; 2] = [
    "max(tanh(0.5*x2), 0) * (log(max(abs(0.5*(-x1-7) - tanh(-x2)), 0.000005)) + 6) \
     + max(tanh(-0.5*x2), 0) * (((-x1+7)^2 + 0.1*(-x2-8)^2)/10 - 20)",
    "max(tanh(0.5*x2), 0) * (log(max(abs(0.5*(-x1+3) - tanh(-x2) + 2), 0.000005)) + 6) \
     + max(tanh(-0.5*x2), 0) * (((-x1-7)^2 + 0.1*(-x2-8)^2)/10 - 20)",
];

/// Standard starting points for the toy problem.
pub const TOY_INITS: [[f64; 2]; 5] = [[-8.5, 7.5], [-8.5, 5.0], [0.0, 0.0], [9.0, 9.0], [10.0, -8.0]];

/// One parsed expression per task, all over the same θ.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpressionProblem {
    exprs: Vec<Expr>,
    sources: Vec<String>,
    dim: usize,
    init: Option<Vec<f64>>,
}

/// Parses one loss per task. Errors carry the 1-based task index.
pub fn from_expressions<S: AsRef<str>>(exprs: &[S], dim: usize) -> Result<ExpressionProblem> {
    ExpressionProblem::new(exprs, dim)
}

pub fn toy_two_task() -> ExpressionProblem {
    let mut p = ExpressionProblem::new(&TOY_LOSSES, 2).expect("toy losses parse");
    p.init = Some(TOY_INITS[0].to_vec());
    p
}

impl ExpressionProblem {
    pub fn new<S: AsRef<str>>(exprs: &[S], dim: usize) -> Result<Self> {
        if exprs.is_empty() {
            return Err(Error::invalid("at least one task expression is required"));
        }
        if dim == 0 {
            return Err(Error::invalid("parameter dimension must be positive"));
        }
        let mut parsed = Vec::with_capacity(exprs.len());
        for (i, s) in exprs.iter().enumerate() {
            let e = parse(s.as_ref()).map_err(|err| err.for_task(i + 1))?;
            if e.min_dim() > dim {
                return Err(
                    Error::invalid(format!("expression uses x{} but dim is {dim}", e.min_dim())).for_task(i + 1),
                );
            }
            parsed.push(e);
        }
        Ok(ExpressionProblem {
            exprs: parsed,
            sources: exprs.iter().map(|s| s.as_ref().to_string()).collect(),
            dim,
            init: None,
        })
    }

    pub fn expressions(&self) -> &[Expr] {
        &self.exprs
    }

    pub fn sources(&self) -> &[String] {
        &self.sources
    }

    fn check(&self, theta: &ParamVector) -> Result<()> {
        if theta.dim() != self.dim {
            return Err(Error::invalid(format!(
                "expected {} parameters, got {}",
                self.dim,
                theta.dim()
            )));
        }
        Ok(())
    }
}

impl Problem for ExpressionProblem {
    fn dim(&self) -> usize {
        self.dim
    }

    fn tasks(&self) -> usize {
        self.exprs.len()
    }

    fn losses(&self, theta: &ParamVector) -> Result<Vec<f64>> {
        self.check(theta)?;
        self.exprs
            .iter()
            .enumerate()
            .map(|(i, e)| eval(e, theta.as_slice()).map_err(|err| err.for_task(i + 1)))
            .collect()
    }

    fn gradients(&self, theta: &ParamVector) -> Result<TaskGradients> {
        Ok(self.evaluate(theta)?.gradients)
    }

    fn evaluate(&self, theta: &ParamVector) -> Result<Evaluation> {
        self.check(theta)?;
        let mut losses = Vec::with_capacity(self.exprs.len());
        let mut rows = Vec::with_capacity(self.exprs.len());
        for (i, e) in self.exprs.iter().enumerate() {
            let dv = eval_dual(e, theta.as_slice()).map_err(|err| err.for_task(i + 1))?;
            losses.push(dv.value);
            rows.push(dv.tangents);
        }
        Ok(Evaluation {
            losses,
            gradients: TaskGradients::new(rows)?,
            head_gradient: Vec::new(),
        })
    }

    fn default_init(&self) -> Option<ParamVector> {
        self.init.clone().map(ParamVector::from_vec_unchecked)
    }
}
