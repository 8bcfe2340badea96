//! Adam-family optimizers sharing one per-tensor step interface.
//!
//! Every variant first forms the Adam direction `m̂/(√v̂ + ε)` and then applies its decay
//! sub-update, which reads only `(θ_t or θ̃_t, α_t, λ, δ_t)` and never the moments.

mod clip;
mod optimizer;
mod schedule;
mod step;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use clip::{clip_global_norm, global_norm};
pub use optimizer::{OptimState, Optimizer, OptimizerConfig, ParamGroup, StepReport};
pub use schedule::Schedule;
pub use step::{
    adam_moments, apply_update, sign, step_adam, step_adamhd_euler, step_adamhd_prox,
    step_adamw, step_lion, DecayRule, MomentState, StepOutcome, TensorState,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum OptimizerKind {
    #[serde(rename = "adam")]
    Adam,
    #[serde(rename = "adamw")]
    AdamW,
    #[serde(rename = "adamhd_euler")]
    AdamHdEuler,
    #[serde(rename = "adamhd_prox")]
    AdamHdProx,
    #[serde(rename = "lion")]
    Lion,
}

impl OptimizerKind {
    pub const ALL: [OptimizerKind; 5] = [
        OptimizerKind::Adam,
        OptimizerKind::AdamW,
        OptimizerKind::AdamHdEuler,
        OptimizerKind::AdamHdProx,
        OptimizerKind::Lion,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            OptimizerKind::Adam => "adam",
            OptimizerKind::AdamW => "adamw",
            OptimizerKind::AdamHdEuler => "adamhd_euler",
            OptimizerKind::AdamHdProx => "adamhd_prox",
            OptimizerKind::Lion => "lion",
        }
    }

    /// Whether the variant uses a Huber threshold.
    pub fn uses_threshold(self) -> bool {
        matches!(self, OptimizerKind::AdamHdEuler | OptimizerKind::AdamHdProx)
    }

    /// `(β1, β2)` used when a config leaves them unset.
    pub fn default_betas(self) -> (f64, f64) {
        match self {
            OptimizerKind::Lion => (0.9, 0.99),
            _ => (0.9, 0.999),
        }
    }
}

impl fmt::Display for OptimizerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for OptimizerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        OptimizerKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::config("optimizer", format!("unknown optimizer `{s}`")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HyperParams {
    /// Peak learning rate `α_base`.
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// Decay coefficient `λ`.
    pub weight_decay: f64,
    pub bias_correction: bool,
}

impl Default for HyperParams {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: 0.0,
            bias_correction: true,
        }
    }
}

impl HyperParams {
    pub fn validate(&self) -> Result<()> {
        let unit = 0.0..1.0;
        if !(self.lr.is_finite() && self.lr > 0.0) {
            return Err(Error::config("lr", format!("must be > 0, got {}", self.lr)));
        }
        if !unit.contains(&self.beta1) {
            return Err(Error::config("beta1", format!("must lie in [0, 1), got {}", self.beta1)));
        }
        if !unit.contains(&self.beta2) {
            return Err(Error::config("beta2", format!("must lie in [0, 1), got {}", self.beta2)));
        }
        if !(self.eps.is_finite() && self.eps > 0.0) {
            return Err(Error::config("eps", format!("must be > 0, got {}", self.eps)));
        }
        if !(self.weight_decay.is_finite() && self.weight_decay >= 0.0) {
            return Err(Error::config(
                "weight_decay",
                format!("must be >= 0, got {}", self.weight_decay),
            ));
        }
        Ok(())
    }

    pub fn with_weight_decay(&self, weight_decay: f64) -> Self {
        Self {
            weight_decay,
            ..self.clone()
        }
    }
}
