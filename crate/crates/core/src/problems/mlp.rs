use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::{Evaluation, Problem};
use crate::error::{Error, Result};
use crate::gradcore::{ParamVector, TaskGradients};

pub const MLP_INPUT_DIM: usize = 3;

/// One tanh hidden layer shared by all tasks, followed by one affine head
/// per task, trained with mean squared error.
///
/// Parameter layout: trunk weights W (width × 3, row-major), trunk bias b
/// (width), then per task the head weights v_k (width) and bias c_k.
/// The trunk block is the shared part.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpProblem {
    inputs: Vec<[f64; MLP_INPUT_DIM]>,
    targets: Vec<Vec<f64>>,
    width: usize,
    init: Vec<f64>,
}

/// Synthetic regression data: inputs are standard normal, the two targets
/// are sin and cos of a fixed random projection of the input.
pub fn mlp_synth(seed: u64, width: usize, samples: usize) -> Result<MlpProblem> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let u: [f64; MLP_INPUT_DIM] =
        std::array::from_fn(|_| rng.sample::<f64, _>(StandardNormal) / (MLP_INPUT_DIM as f64).sqrt());
    let inputs: Vec<[f64; MLP_INPUT_DIM]> = (0..samples)
        .map(|_| std::array::from_fn(|_| rng.sample(StandardNormal)))
        .collect();
    let proj: Vec<f64> = inputs
        .iter()
        .map(|x| x.iter().zip(&u).map(|(a, b)| a * b).sum())
        .collect();
    let targets = vec![
        proj.iter().map(|p| p.sin()).collect(),
        proj.iter().map(|p| p.cos()).collect(),
    ];
    let mut p = MlpProblem::new(inputs, targets, width)?;
    p.init = p.initial_point(&mut rng);
    Ok(p)
}

impl MlpProblem {
    pub fn new(inputs: Vec<[f64; MLP_INPUT_DIM]>, targets: Vec<Vec<f64>>, width: usize) -> Result<Self> {
        if width == 0 {
            return Err(Error::invalid("hidden width must be positive"));
        }
        if inputs.is_empty() {
            return Err(Error::invalid("at least one sample is required"));
        }
        if targets.is_empty() || targets.iter().any(|t| t.len() != inputs.len()) {
            return Err(Error::invalid("need one target per sample for every task"));
        }
        if inputs
            .iter()
            .flatten()
            .chain(targets.iter().flatten())
            .any(|v| !v.is_finite())
        {
            return Err(Error::invalid("data must be finite"));
        }
        let mut p = MlpProblem {
            inputs,
            targets,
            width,
            init: Vec::new(),
        };
        p.init = p.initial_point(&mut ChaCha8Rng::seed_from_u64(0));
        Ok(p)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn samples(&self) -> usize {
        self.inputs.len()
    }

    fn trunk_len(&self) -> usize {
        self.width * (MLP_INPUT_DIM + 1)
    }

    fn head_len(&self) -> usize {
        self.width + 1
    }

    /// Scaled normal trunk and head weights, zero biases.
    pub fn initial_point<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let mut theta = vec![0.0; self.dim()];
        let h = self.width;
        let in_scale = 1.0 / (MLP_INPUT_DIM as f64).sqrt();
        for w in &mut theta[..h * MLP_INPUT_DIM] {
            *w = rng.sample::<f64, _>(StandardNormal) * in_scale;
        }
        let out_scale = 1.0 / (h as f64).sqrt();
        for k in 0..self.tasks() {
            let start = self.trunk_len() + k * self.head_len();
            for v in &mut theta[start..start + h] {
                *v = rng.sample::<f64, _>(StandardNormal) * out_scale;
            }
        }
        theta
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

    fn hidden(&self, theta: &[f64], x: &[f64; MLP_INPUT_DIM]) -> Vec<f64> {
        let h = self.width;
        let (w, b) = theta[..self.trunk_len()].split_at(h * MLP_INPUT_DIM);
        (0..h)
            .map(|j| {
                let z: f64 = w[j * MLP_INPUT_DIM..(j + 1) * MLP_INPUT_DIM]
                    .iter()
                    .zip(x)
                    .map(|(a, b)| a * b)
                    .sum::<f64>()
                    + b[j];
                z.tanh()
            })
            .collect()
    }

    /// Losses and the full gradient of each task loss over every parameter
    /// (zero outside the trunk and that task's head).
    pub fn full_gradients(&self, theta: &ParamVector) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
        self.check(theta)?;
        let th = theta.as_slice();
        let (h, k, n) = (self.width, self.tasks(), self.samples() as f64);
        let mut losses = vec![0.0; k];
        let mut grads = vec![vec![0.0; self.dim()]; k];
        for (s, x) in self.inputs.iter().enumerate() {
            let act = self.hidden(th, x);
            for t in 0..k {
                let head = self.trunk_len() + t * self.head_len();
                let v = &th[head..head + h];
                let pred = v.iter().zip(&act).map(|(a, b)| a * b).sum::<f64>() + th[head + h];
                let r = pred - self.targets[t][s];
                losses[t] += r * r / n;
                let dpred = 2.0 * r / n;
                let g = &mut grads[t];
                for j in 0..h {
                    g[head + j] += dpred * act[j];
                    let dz = dpred * v[j] * (1.0 - act[j] * act[j]);
                    for (i, xi) in x.iter().enumerate() {
                        g[j * MLP_INPUT_DIM + i] += dz * xi;
                    }
                    g[h * MLP_INPUT_DIM + j] += dz;
                }
                g[head + h] += dpred;
            }
        }
        if losses.iter().chain(grads.iter().flatten()).any(|v| !v.is_finite()) {
            return Err(Error::NumericalDegeneracy("non-finite network output".into()));
        }
        Ok((losses, grads))
    }
}

impl Problem for MlpProblem {
    fn dim(&self) -> usize {
        self.trunk_len() + self.tasks() * self.head_len()
    }

    fn tasks(&self) -> usize {
        self.targets.len()
    }

    fn shared_dim(&self) -> usize {
        self.trunk_len()
    }

    fn losses(&self, theta: &ParamVector) -> Result<Vec<f64>> {
        Ok(self.full_gradients(theta)?.0)
    }

    fn gradients(&self, theta: &ParamVector) -> Result<TaskGradients> {
        Ok(self.evaluate(theta)?.gradients)
    }

    fn head_gradient(&self, theta: &ParamVector) -> Result<Vec<f64>> {
        Ok(self.evaluate(theta)?.head_gradient)
    }

    fn evaluate(&self, theta: &ParamVector) -> Result<Evaluation> {
        let (losses, full) = self.full_gradients(theta)?;
        let shared = self.trunk_len();
        let mut head = vec![0.0; self.dim() - shared];
        for g in &full {
            for (acc, v) in head.iter_mut().zip(&g[shared..]) {
                *acc += v;
            }
        }
        let rows = full.into_iter().map(|mut g| {
            g.truncate(shared);
            g
        });
        Ok(Evaluation {
            losses,
            gradients: TaskGradients::new(rows.collect())?,
            head_gradient: head,
        })
    }

    fn default_init(&self) -> Option<ParamVector> {
        Some(ParamVector::from_vec_unchecked(self.init.clone()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layout_and_shapes() {
        let p = mlp_synth(7, 4, 16).unwrap();
        assert_eq!(p.tasks(), 2);
        assert_eq!(p.shared_dim(), 16);
        assert_eq!(p.dim(), 16 + 2 * 5);
        let theta = p.default_init().unwrap();
        let e = p.evaluate(&theta).unwrap();
        assert_eq!(e.gradients.dim(), 16);
        assert_eq!(e.head_gradient.len(), 10);
        assert!(e.losses.iter().all(|l| *l >= 0.0));
    }

    #[test]
    fn same_seed_same_problem() {
        assert_eq!(mlp_synth(3, 5, 10).unwrap(), mlp_synth(3, 5, 10).unwrap());
        assert_ne!(mlp_synth(3, 5, 10).unwrap(), mlp_synth(4, 5, 10).unwrap());
    }

    #[test]
    fn finite_differences() {
        let p = mlp_synth(11, 3, 8).unwrap();
        let theta = p.default_init().unwrap().into_vec();
        let (_, grads) = p.full_gradients(&ParamVector::new(theta.clone()).unwrap()).unwrap();
        let h = 1e-6;
        for i in 0..theta.len() {
            let mut up = theta.clone();
            let mut dn = theta.clone();
            up[i] += h;
            dn[i] -= h;
            let lu = p.losses(&ParamVector::new(up).unwrap()).unwrap();
            let ld = p.losses(&ParamVector::new(dn).unwrap()).unwrap();
            for t in 0..2 {
                let fd = (lu[t] - ld[t]) / (2.0 * h);
                assert!(
                    (fd - grads[t][i]).abs() < 1e-6,
                    "task {t} coord {i}: {fd} vs {}",
                    grads[t][i]
                );
            }
        }
    }

    #[test]
    fn rejects_bad_data() {
        assert!(MlpProblem::new(vec![[0.0; 3]], vec![vec![]], 2).is_err());
        assert!(MlpProblem::new(vec![[0.0; 3]], vec![vec![1.0]], 0).is_err());
    }
}
