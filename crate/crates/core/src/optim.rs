//! Parameter updates driven by a combined direction d.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gradcore::ParamVector;

/// θ − α·d.
pub fn sgd_step(theta: &ParamVector, d: &[f64], alpha: f64) -> ParamVector {
    let mut out = theta.as_slice().to_vec();
    sgd_update(&mut out, d, alpha);
    ParamVector::from_vec_unchecked(out)
}

pub(crate) fn sgd_update(theta: &mut [f64], d: &[f64], alpha: f64) {
    for (t, di) in theta.iter_mut().zip(d) {
        *t -= alpha * di;
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub first_moment: Vec<f64>,
    pub second_moment: Vec<f64>,
    pub step_count: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamState {
    pub fn new(dim: usize) -> Self {
        Self::with_params(dim, 0.9, 0.999, 1e-8)
    }

    pub fn with_params(dim: usize, beta1: f64, beta2: f64, eps: f64) -> Self {
        AdamState {
            first_moment: vec![0.0; dim],
            second_moment: vec![0.0; dim],
            step_count: 0,
            beta1,
            beta2,
            eps,
        }
    }

    pub(crate) fn update(&mut self, theta: &mut [f64], d: &[f64], alpha: f64) {
        self.step_count += 1;
        let t = self.step_count as i32;
        let c1 = 1.0 - self.beta1.powi(t);
        let c2 = 1.0 - self.beta2.powi(t);
        for i in 0..theta.len() {
            let g = d[i];
            self.first_moment[i] = self.beta1 * self.first_moment[i] + (1.0 - self.beta1) * g;
            self.second_moment[i] = self.beta2 * self.second_moment[i] + (1.0 - self.beta2) * g * g;
            let m_hat = self.first_moment[i] / c1;
            let v_hat = self.second_moment[i] / c2;
            theta[i] -= alpha * m_hat / (v_hat.sqrt() + self.eps);
        }
    }
}

/// One bias-corrected adaptive-moment step, treating `d` as the gradient.
pub fn adam_step(state: &mut AdamState, theta: &ParamVector, d: &[f64], alpha: f64) -> ParamVector {
    let mut out = theta.as_slice().to_vec();
    state.update(&mut out, d, alpha);
    ParamVector::from_vec_unchecked(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum StepPolicy {
    Fixed { alpha: f64 },
    DecayingCGe1 { c: f64, h: f64 },
}

/// ‖g_w*‖ / (H (c − 1) ‖g0‖).
pub fn decaying_step_size(c: f64, h: f64, g0_norm: f64, gw_norm: f64) -> Result<f64> {
    if !(c > 1.0) {
        return Err(Error::invalid(format!("decaying step needs c > 1, got {c}")));
    }
    if !(h > 0.0) || !h.is_finite() {
        return Err(Error::invalid(format!("Lipschitz constant must be positive, got {h}")));
    }
    if !(g0_norm > 0.0) || !g0_norm.is_finite() {
        return Err(Error::invalid("decaying step needs a nonzero average gradient"));
    }
    if !(gw_norm >= 0.0) || !gw_norm.is_finite() {
        return Err(Error::invalid("‖g_w‖ must be finite and nonnegative"));
    }
    Ok(gw_norm / (h * (c - 1.0) * g0_norm))
}
