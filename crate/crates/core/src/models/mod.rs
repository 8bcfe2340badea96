//! Toy differentiable problems with hand-written gradients.

mod logistic;
mod mlp;
mod quadratic;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::SplitMix64;
use crate::tensor::{flatten, unflatten, ParamTensor};

pub use logistic::{logistic_problem, LogisticProblem};
pub use mlp::{mlp_problem, MlpProblem};
pub use quadratic::{quadratic_problem, QuadraticProblem, HEAVY_FRACTION, HEAVY_SCALE};

/// Which slice of the data (or gradient noise) a loss/gradient evaluation sees.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Batch {
    /// Every sample, no noise.
    Full,
    /// `size` draws determined entirely by `seed`.
    Sample { seed: u64, size: usize },
}

/// A named set of tensors that share decay treatment by default.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GroupLayout {
    pub name: String,
    pub tensors: Vec<usize>,
    /// `false` for tensors excluded from decay by default (biases).
    pub decay: bool,
}

pub trait Problem: Send + Sync {
    fn name(&self) -> &str;

    /// Deterministic starting point.
    fn init_params(&self) -> Vec<ParamTensor>;

    fn groups(&self) -> Vec<GroupLayout>;

    fn loss(&self, params: &[ParamTensor], batch: &Batch) -> f64;

    fn grad(&self, params: &[ParamTensor], batch: &Batch) -> Vec<Vec<f64>>;

    /// Loss over a flat parameter vector laid out like `init_params`.
    fn flat_loss(&self, flat: &[f64], batch: &Batch) -> f64 {
        self.loss(&unflatten(flat, &self.init_params()), batch)
    }

    fn flat_grad(&self, flat: &[f64], batch: &Batch) -> Vec<f64> {
        let g = self.grad(&unflatten(flat, &self.init_params()), batch);
        g.into_iter().flatten().collect()
    }

    fn flat_init(&self) -> Vec<f64> {
        flatten(&self.init_params())
    }
}

/// Sample indices for a data problem.
pub(crate) fn batch_indices(batch: &Batch, n: usize) -> Vec<usize> {
    match *batch {
        Batch::Full => (0..n).collect(),
        Batch::Sample { seed, size } => {
            let mut rng = SplitMix64::new(seed);
            (0..size.max(1)).map(|_| rng.below(n)).collect()
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProblemName {
    Quadratic,
    Logistic,
    Mlp,
}

/// Problem selection from config (`problem.*` keys).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProblemSpec {
    pub name: ProblemName,
    pub dim: usize,
    pub condition_number: f64,
    pub layers: Vec<usize>,
    pub n_samples: usize,
    pub seed: u64,
    /// Per-coordinate gradient noise of the quadratic at batch size 1.
    pub noise: f64,
    /// Standard deviation of the quadratic's random starting point.
    pub init_scale: f64,
}

impl Default for ProblemSpec {
    fn default() -> Self {
        Self {
            name: ProblemName::Quadratic,
            dim: 64,
            condition_number: 100.0,
            layers: vec![4, 16, 1],
            n_samples: 256,
            seed: 0,
            noise: 0.0,
            init_scale: 0.0,
        }
    }
}

impl ProblemSpec {
    pub fn build(&self) -> Result<Box<dyn Problem>> {
        Ok(match self.name {
            ProblemName::Quadratic => Box::new(
                quadratic_problem(self.dim, self.condition_number, self.seed)?
                    .with_noise(self.noise)?
                    .with_init_scale(self.init_scale)?,
            ),
            ProblemName::Logistic => Box::new(logistic_problem(self.n_samples, self.dim, self.seed)?),
            ProblemName::Mlp => Box::new(mlp_problem(&self.layers, self.n_samples, self.seed)?),
        })
    }
}

pub(crate) fn shape_error(key: &str, msg: impl Into<String>) -> Error {
    Error::config(format!("problem.{key}"), msg)
}
