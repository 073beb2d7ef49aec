use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::combiners::{CombinerSpec, Method};
use crate::error::{Error, Result};
use crate::problems::{self, Problem, TOY_INITS};

/// Which problem to optimize. A bare string names a built-in with default
/// parameters (`"toy"`, `"quadratic"`, `"mlp"`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ProblemSpec {
    Named(String),
    Quadratic(QuadraticSpec),
    Mlp(MlpSpec),
    Expressions(ExpressionSpec),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuadraticSpec {
    pub quadratic: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MlpSpec {
    pub mlp: MlpParams,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MlpParams {
    #[serde(default = "default_width")]
    pub width: usize,
    #[serde(default = "default_samples")]
    pub samples: usize,
}

impl Default for MlpParams {
    fn default() -> Self {
        MlpParams {
            width: default_width(),
            samples: default_samples(),
        }
    }
}

fn default_width() -> usize {
    8
}

fn default_samples() -> usize {
    64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExpressionSpec {
    pub expressions: Vec<String>,
    pub dim: usize,
}

impl ProblemSpec {
    pub fn toy() -> Self {
        ProblemSpec::Named("toy".into())
    }

    /// Builds the problem. `seed` drives any randomly generated data.
    pub fn build(&self, seed: u64) -> Result<Box<dyn Problem>> {
        Ok(match self {
            ProblemSpec::Named(name) => match name.as_str() {
                "toy" => Box::new(problems::toy_two_task()),
                "quadratic" => Box::new(problems::quadratic(vec![vec![1.0, 0.0], vec![-1.0, 0.0]])?),
                "mlp" => {
                    let p = MlpParams::default();
                    Box::new(problems::mlp_synth(seed, p.width, p.samples)?)
                }
                other => {
                    return Err(Error::Config(format!(
                        "unknown problem `{other}` (expected toy, quadratic or mlp)"
                    )))
                }
            },
            ProblemSpec::Quadratic(q) => Box::new(problems::quadratic(q.quadratic.clone())?),
            ProblemSpec::Mlp(m) => Box::new(problems::mlp_synth(seed, m.mlp.width, m.mlp.samples)?),
            ProblemSpec::Expressions(e) => Box::new(problems::from_expressions(&e.expressions, e.dim)?),
        })
    }
}

/// How θ is updated from the combined direction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum StepperSpec {
    Fixed {
        lr: f64,
    },
    Adam {
        lr: f64,
    },
    /// Equality step size of the c > 1 analysis. `h` defaults to the
    /// problem's known Lipschitz constant.
    Decaying {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        h: Option<f64>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub problem: ProblemSpec,
    pub method: CombinerSpec,
    pub stepper: StepperSpec,
    pub steps: u64,
    /// Starting points. Empty means the problem's own default.
    #[serde(default)]
    pub inits: Vec<Vec<f64>>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_log_every")]
    pub log_every: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_path: Option<PathBuf>,
}

fn default_log_every() -> u64 {
    1
}

pub const TOY_LR: f64 = 2e-3;
pub const TOY_STEPS: u64 = 70_000;
pub const TOY_LOG_EVERY: u64 = 100;

/// The toy study: adaptive-moment stepper from the five standard inits.
pub fn toy_config(method: Method, c: f64) -> ExperimentConfig {
    ExperimentConfig {
        problem: ProblemSpec::toy(),
        method: CombinerSpec {
            c,
            ..CombinerSpec::new(method)
        },
        stepper: StepperSpec::Adam { lr: TOY_LR },
        steps: TOY_STEPS,
        inits: TOY_INITS.iter().map(|p| p.to_vec()).collect(),
        seed: 0,
        log_every: TOY_LOG_EVERY,
        output_path: None,
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(format!("line {}, column {}: {e}", e.line(), e.column())))
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Checks the config against the problem it names and returns the
    /// problem together with the resolved starting points.
    pub fn resolve(&self) -> Result<(Box<dyn Problem>, Vec<Vec<f64>>)> {
        let problem = self.problem.build(self.seed)?;
        self.check_with(problem.as_ref())?;
        let inits = if self.inits.is_empty() {
            match problem.default_init() {
                Some(p) => vec![p.into_vec()],
                None => return Err(Error::Config("`inits` must not be empty".into())),
            }
        } else {
            self.inits.clone()
        };
        Ok((problem, inits))
    }

    fn check_with(&self, problem: &dyn Problem) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.steps < 1 {
            return bad("`steps` must be at least 1".into());
        }
        if self.log_every < 1 {
            return bad("`log_every` must be at least 1".into());
        }
        self.method
            .validate(Some(problem.tasks()))
            .map_err(|e| Error::Config(format!("method: {e}")))?;
        for (i, p) in self.inits.iter().enumerate() {
            if p.len() != problem.dim() {
                return bad(format!(
                    "inits[{i}] has {} entries, the problem has {} parameters",
                    p.len(),
                    problem.dim()
                ));
            }
            if p.iter().any(|v| !v.is_finite()) {
                return bad(format!("inits[{i}] is not finite"));
            }
        }
        match self.stepper {
            StepperSpec::Fixed { lr } | StepperSpec::Adam { lr } => {
                if !(lr > 0.0) || !lr.is_finite() {
                    return bad(format!("stepper.lr must be positive, got {lr}"));
                }
            }
            StepperSpec::Decaying { h } => {
                if !matches!(self.method.method, Method::Cagrad | Method::CagradFast) || self.method.c <= 1.0 {
                    return bad("the decaying stepper needs cagrad with c > 1".into());
                }
                match h.or(problem.lipschitz()) {
                    Some(h) if h > 0.0 && h.is_finite() => {}
                    Some(h) => return bad(format!("stepper.h must be positive, got {h}")),
                    None => return bad("stepper.h is required: the problem has no known Lipschitz constant".into()),
                }
            }
        }
        Ok(())
    }

    pub(crate) fn lipschitz(&self, problem: &dyn Problem) -> Option<f64> {
        match self.stepper {
            StepperSpec::Decaying { h } => h.or(problem.lipschitz()),
            _ => problem.lipschitz(),
        }
    }
}
