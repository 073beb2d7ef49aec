use super::Problem;
use crate::error::{Error, Result};
use crate::gradcore::{ParamVector, TaskGradients};

/// Lᵢ(θ) = ½‖θ − aᵢ‖². Every gradient is 1-Lipschitz and the average loss
/// is minimized at the anchor mean ā.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticProblem {
    anchors: Vec<Vec<f64>>,
}

pub fn quadratic(anchors: Vec<Vec<f64>>) -> Result<QuadraticProblem> {
    QuadraticProblem::new(anchors)
}

impl QuadraticProblem {
    pub fn new(anchors: Vec<Vec<f64>>) -> Result<Self> {
        if anchors.is_empty() {
            return Err(Error::invalid("quadratic problem needs at least one anchor"));
        }
        let m = anchors[0].len();
        if m == 0 || anchors.iter().any(|a| a.len() != m) {
            return Err(Error::invalid("anchors must share a nonzero dimension"));
        }
        if anchors.iter().flatten().any(|x| !x.is_finite()) {
            return Err(Error::invalid("anchors must be finite"));
        }
        Ok(QuadraticProblem { anchors })
    }

    pub fn anchors(&self) -> &[Vec<f64>] {
        &self.anchors
    }

    pub fn anchor_mean(&self) -> Vec<f64> {
        let k = self.anchors.len() as f64;
        (0..self.dim())
            .map(|j| self.anchors.iter().map(|a| a[j]).sum::<f64>() / k)
            .collect()
    }

    fn check(&self, theta: &ParamVector) -> Result<()> {
        if theta.dim() != self.dim() {
            return Err(Error::invalid(format!(
                "expected {} parameters, got {}",
                self.dim(),
                theta.dim()
            )));
        }
        Ok(())
    }
}

impl Problem for QuadraticProblem {
    fn dim(&self) -> usize {
        self.anchors[0].len()
    }

    fn tasks(&self) -> usize {
        self.anchors.len()
    }

    fn losses(&self, theta: &ParamVector) -> Result<Vec<f64>> {
        self.check(theta)?;
        Ok(self
            .anchors
            .iter()
            .map(|a| {
                0.5 * a
                    .iter()
                    .zip(theta.as_slice())
                    .map(|(ai, t)| (t - ai) * (t - ai))
                    .sum::<f64>()
            })
            .collect())
    }

    fn gradients(&self, theta: &ParamVector) -> Result<TaskGradients> {
        self.check(theta)?;
        TaskGradients::new(
            self.anchors
                .iter()
                .map(|a| a.iter().zip(theta.as_slice()).map(|(ai, t)| t - ai).collect())
                .collect(),
        )
    }

    fn lipschitz(&self) -> Option<f64> {
        Some(1.0)
    }

    fn average_loss_optimum(&self) -> Option<f64> {
        let k = self.anchors.len() as f64;
        let mean_sq = self
            .anchors
            .iter()
            .map(|a| a.iter().map(|x| x * x).sum::<f64>())
            .sum::<f64>()
            / k;
        let abar = self.anchor_mean();
        Some(0.5 * mean_sq - 0.5 * abar.iter().map(|x| x * x).sum::<f64>())
    }
}
