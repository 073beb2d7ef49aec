//! Problems expose per-task losses and exact per-task gradients.

mod expressions;
mod mlp;
mod quadratic;

pub use expressions::{from_expressions, toy_two_task, ExpressionProblem, TOY_INITS, TOY_LOSSES};
pub use mlp::{mlp_synth, MlpProblem, MLP_INPUT_DIM};
pub use quadratic::{quadratic, QuadraticProblem};

use crate::error::Result;
use crate::gradcore::{ParamVector, TaskGradients};

/// Losses and gradients at one parameter vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub losses: Vec<f64>,
    /// Gradients of the shared coordinates, one row per task.
    pub gradients: TaskGradients,
    /// Gradient of the task-specific coordinates (empty when every
    /// coordinate is shared). Not touched by combiners.
    pub head_gradient: Vec<f64>,
}

/// A multi-task objective over θ ∈ ℝ^dim. The first `shared_dim()`
/// coordinates are shared across tasks and are what combiners operate on;
/// any remaining coordinates belong to individual task heads.
pub trait Problem: Send + Sync {
    fn dim(&self) -> usize;

    fn tasks(&self) -> usize;

    fn shared_dim(&self) -> usize {
        self.dim()
    }

    fn losses(&self, theta: &ParamVector) -> Result<Vec<f64>>;

    fn gradients(&self, theta: &ParamVector) -> Result<TaskGradients>;

    fn head_gradient(&self, _theta: &ParamVector) -> Result<Vec<f64>> {
        Ok(Vec::new())
    }

    fn evaluate(&self, theta: &ParamVector) -> Result<Evaluation> {
        Ok(Evaluation {
            losses: self.losses(theta)?,
            gradients: self.gradients(theta)?,
            head_gradient: self.head_gradient(theta)?,
        })
    }

    /// Common Lipschitz constant H of every task gradient, when known.
    fn lipschitz(&self) -> Option<f64> {
        None
    }

    /// inf_θ of the average loss, when known.
    fn average_loss_optimum(&self) -> Option<f64> {
        None
    }

    /// A problem-chosen starting point (used when a config lists no inits).
    fn default_init(&self) -> Option<ParamVector> {
        None
    }
}

/// Mean of the task losses.
pub fn average_loss(losses: &[f64]) -> f64 {
    losses.iter().sum::<f64>() / losses.len() as f64
}
