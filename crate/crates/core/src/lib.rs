//! Multi-task gradient combination.
//!
//! Given per-task gradients at a shared parameter vector, a combiner returns
//! one update direction. CAGrad maximizes the worst per-task improvement
//! within a ball around the average gradient; MGDA, PCGrad and plain
//! averaging are provided alongside, together with test problems, steppers
//! and an experiment harness.

pub mod combiners;
pub mod error;
pub mod expr;
pub mod gradcore;
pub mod harness;
pub mod optim;
pub mod parallel;
pub mod problems;
pub mod solvers;
pub mod verify;

pub use combiners::{CombinerSpec, Method};
pub use error::{Error, Result};
pub use gradcore::{CombineResult, ParamVector, SimplexWeights, TaskGradients};
pub use parallel::Execution;
pub use problems::Problem;
