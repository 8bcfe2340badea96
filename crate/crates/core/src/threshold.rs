//! Per-tensor breakpoint policies.
//!
//! `mean_magnitude` sets `δ_t = c·mean|θ_t|`; `ema` smooths the mean magnitude with
//! `μ_t = β0·μ_{t−1} + (1 − β0)·mean|θ_t|` and sets `δ_t = c·μ_t`. Every emitted δ is clamped
//! from below by `delta_floor` so an all-zero tensor still yields a valid threshold.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::regularizer::HuberThreshold;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThresholdMode {
    Fixed,
    MeanMagnitude,
    Ema,
    /// `δ = +∞`: Huber decay degenerates to plain L2 decay.
    Unbounded,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ThresholdSpec {
    pub mode: ThresholdMode,
    pub c: f64,
    pub beta0: f64,
    pub delta_fixed: Option<f64>,
    pub delta_floor: f64,
}

impl Default for ThresholdSpec {
    fn default() -> Self {
        Self {
            mode: ThresholdMode::MeanMagnitude,
            c: 1.0,
            beta0: 0.99,
            delta_fixed: None,
            delta_floor: 1e-8,
        }
    }
}

impl ThresholdSpec {
    pub fn fixed(delta: f64) -> Self {
        Self {
            mode: ThresholdMode::Fixed,
            delta_fixed: Some(delta),
            ..Self::default()
        }
    }

    pub fn mean_magnitude(c: f64) -> Self {
        Self {
            mode: ThresholdMode::MeanMagnitude,
            c,
            ..Self::default()
        }
    }

    pub fn ema(c: f64, beta0: f64) -> Self {
        Self {
            mode: ThresholdMode::Ema,
            c,
            beta0,
            ..Self::default()
        }
    }

    pub fn unbounded() -> Self {
        Self {
            mode: ThresholdMode::Unbounded,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |key: &str, msg: String| Err(Error::config(format!("threshold.{key}"), msg));
        if !(self.c.is_finite() && self.c > 0.0) {
            return bad("c", format!("must be > 0, got {}", self.c));
        }
        if !(0.0..1.0).contains(&self.beta0) {
            return bad("beta0", format!("must lie in [0, 1), got {}", self.beta0));
        }
        if !(self.delta_floor.is_finite() && self.delta_floor > 0.0) {
            return bad("delta_floor", format!("must be > 0, got {}", self.delta_floor));
        }
        if self.mode == ThresholdMode::Fixed {
            match self.delta_fixed {
                Some(d) if d.is_finite() && d > 0.0 => {}
                Some(d) => return bad("delta_fixed", format!("must be > 0, got {d}")),
                None => return bad("delta_fixed", "required when mode is `fixed`".into()),
            }
        }
        Ok(())
    }

    fn floored(&self, raw: f64) -> HuberThreshold {
        HuberThreshold::Finite(raw.max(self.delta_floor))
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ThresholdState {
    pub mu: f64,
    pub initialized: bool,
}

impl ThresholdState {
    pub fn with_mu(mu: f64) -> Self {
        Self {
            mu,
            initialized: true,
        }
    }
}

/// `(1/|Θ|)·Σ|θ_i|`.
pub fn mean_magnitude(theta: &[f64]) -> Result<f64> {
    if theta.is_empty() {
        return Err(Error::domain("mean magnitude of an empty tensor"));
    }
    Ok(theta.iter().map(|x| x.abs()).sum::<f64>() / theta.len() as f64)
}

fn next_mu(spec: &ThresholdSpec, state: &ThresholdState, mean: f64) -> f64 {
    if state.initialized {
        spec.beta0 * state.mu + (1.0 - spec.beta0) * mean
    } else {
        // μ₀ is the first observed mean magnitude.
        mean
    }
}

/// Compute `δ_t` from the current tensor and advance the EMA state.
pub fn update_threshold(
    spec: &ThresholdSpec,
    state: &mut ThresholdState,
    theta: &[f64],
) -> Result<HuberThreshold> {
    let delta = peek_threshold(spec, state, theta)?;
    if spec.mode == ThresholdMode::Ema {
        let mean = mean_magnitude(theta)?;
        state.mu = next_mu(spec, state, mean);
        state.initialized = true;
    }
    Ok(delta)
}

/// The δ [`update_threshold`] would emit, without touching the state.
pub fn peek_threshold(
    spec: &ThresholdSpec,
    state: &ThresholdState,
    theta: &[f64],
) -> Result<HuberThreshold> {
    match spec.mode {
        ThresholdMode::Unbounded => Ok(HuberThreshold::Unbounded),
        ThresholdMode::Fixed => {
            let d = spec
                .delta_fixed
                .ok_or_else(|| Error::config("threshold.delta_fixed", "missing"))?;
            if theta.is_empty() {
                return Err(Error::domain("threshold of an empty tensor"));
            }
            Ok(spec.floored(d))
        }
        ThresholdMode::MeanMagnitude => Ok(spec.floored(spec.c * mean_magnitude(theta)?)),
        ThresholdMode::Ema => {
            let mu = next_mu(spec, state, mean_magnitude(theta)?);
            Ok(spec.floored(spec.c * mu))
        }
    }
}
