use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Linear warmup followed by cosine decay to `alpha_min`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    pub alpha_base: f64,
    pub warmup_steps: u64,
    pub total_steps: u64,
    pub alpha_min: f64,
}

impl Schedule {
    pub fn constant(alpha: f64, total_steps: u64) -> Self {
        Self {
            alpha_base: alpha,
            warmup_steps: 0,
            total_steps,
            alpha_min: alpha,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha_base.is_finite() && self.alpha_base > 0.0) {
            return Err(Error::config("lr", format!("must be > 0, got {}", self.alpha_base)));
        }
        if !(self.alpha_min >= 0.0 && self.alpha_min <= self.alpha_base) {
            return Err(Error::config(
                "schedule.min_lr",
                format!("must lie in [0, lr], got {}", self.alpha_min),
            ));
        }
        if self.total_steps == 0 {
            return Err(Error::config("schedule.total_steps", "must be >= 1"));
        }
        if self.warmup_steps > self.total_steps {
            return Err(Error::config(
                "schedule.warmup_steps",
                format!(
                    "{} exceeds total_steps {}",
                    self.warmup_steps, self.total_steps
                ),
            ));
        }
        Ok(())
    }

    /// Learning rate for update index `t` (0-based).
    ///
    /// Warmup gives `α_base·(t+1)/warmup` for `t < warmup`. The decay span returns exactly
    /// `α_base` at `t = warmup` and exactly `α_min` at `t = total`.
    pub fn lr_at(&self, t: u64) -> Result<f64> {
        if t > self.total_steps {
            return Err(Error::domain(format!(
                "step {t} beyond schedule end {}",
                self.total_steps
            )));
        }
        if t < self.warmup_steps {
            return Ok(self.alpha_base * (t + 1) as f64 / self.warmup_steps as f64);
        }
        let span = self.total_steps - self.warmup_steps;
        if t == self.warmup_steps || span == 0 {
            return Ok(self.alpha_base);
        }
        if t == self.total_steps {
            return Ok(self.alpha_min);
        }
        let progress = (t - self.warmup_steps) as f64 / span as f64;
        let cosine = 0.5 * (1.0 + (std::f64::consts::PI * progress).cos());
        Ok(self.alpha_min + (self.alpha_base - self.alpha_min) * cosine)
    }
}
