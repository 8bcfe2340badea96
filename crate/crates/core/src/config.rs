//! Run configuration: JSON schema, dotted-path overrides and validation.
//!
//! A config file is a JSON object; every key is optional and falls back to the defaults below.
//! Overrides are `key=value` strings applied after parsing, e.g. `optimizer=adamhd_prox`,
//! `threshold.c=0.5` or `groups.biases.weight_decay=0.1`. The value is read as JSON when it
//! parses as JSON and as a bare string otherwise. Unknown keys are rejected.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::models::ProblemSpec;
use crate::optim::{HyperParams, OptimizerConfig, OptimizerKind, Schedule};
use crate::threshold::ThresholdSpec;

pub const DEFAULT_PRUNING_THRESHOLDS: [f64; 5] = [1e-3, 3e-3, 1e-2, 3e-2, 1e-1];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScheduleSpec {
    pub warmup_steps: u64,
    /// Defaults to the run's `total_steps`.
    pub total_steps: Option<u64>,
    pub min_lr: f64,
}

impl Default for ScheduleSpec {
    fn default() -> Self {
        Self {
            warmup_steps: 0,
            total_steps: None,
            min_lr: 0.0,
        }
    }
}

/// Per-group settings that replace the run-wide ones.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GroupOverride {
    pub weight_decay: Option<f64>,
    pub threshold: Option<ThresholdSpec>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub problem: ProblemSpec,
    pub optimizer: OptimizerKind,
    pub lr: f64,
    /// Optimizer-specific default when unset (Lion uses `(0.9, 0.99)`).
    pub beta1: Option<f64>,
    pub beta2: Option<f64>,
    pub eps: f64,
    pub weight_decay: f64,
    pub bias_correction: bool,
    pub grad_clip_norm: Option<f64>,
    pub schedule: ScheduleSpec,
    pub threshold: ThresholdSpec,
    pub groups: BTreeMap<String, GroupOverride>,
    pub total_steps: u64,
    /// `None` evaluates every step on the full batch without noise.
    pub batch_size: Option<usize>,
    pub seed: u64,
    pub metric_every: u64,
    pub pruning_thresholds: Vec<f64>,
    /// Loss levels for the steps-to-target table; empty means fractions of the initial loss.
    pub loss_targets: Vec<f64>,
    pub charts: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            problem: ProblemSpec::default(),
            optimizer: OptimizerKind::AdamW,
            lr: 1e-2,
            beta1: None,
            beta2: None,
            eps: 1e-8,
            weight_decay: 0.1,
            bias_correction: true,
            grad_clip_norm: Some(1.0),
            schedule: ScheduleSpec::default(),
            threshold: ThresholdSpec::default(),
            groups: BTreeMap::new(),
            total_steps: 1000,
            batch_size: None,
            seed: 0,
            metric_every: 10,
            pruning_thresholds: DEFAULT_PRUNING_THRESHOLDS.to_vec(),
            loss_targets: Vec::new(),
            charts: true,
        }
    }
}

fn deserialize_config(value: Value) -> Result<RunConfig> {
    serde_path_to_error::deserialize(value).map_err(|e| {
        let path = e.path().to_string();
        Error::config(path, e.into_inner().to_string())
    })
}

/// Parse a `key=value` override into its path and JSON value.
pub fn parse_override(raw: &str) -> Result<(Vec<String>, Value)> {
    let (key, value) = raw
        .split_once('=')
        .ok_or_else(|| Error::config(raw, "override must look like key=value"))?;
    let key = key.trim();
    if key.is_empty() || key.split('.').any(str::is_empty) {
        return Err(Error::config(raw, "empty key segment"));
    }
    let value = serde_json::from_str(value.trim()).unwrap_or_else(|_| Value::String(value.trim().to_owned()));
    Ok((key.split('.').map(str::to_owned).collect(), value))
}

/// Set `path` inside a JSON object, creating intermediate objects.
pub fn set_path(root: &mut Value, path: &[String], value: Value) -> Result<()> {
    let dotted = path.join(".");
    let mut cur = root;
    for (i, seg) in path.iter().enumerate() {
        if cur.is_null() {
            *cur = Value::Object(Default::default());
        }
        let obj = cur
            .as_object_mut()
            .ok_or_else(|| Error::config(path[..i].join("."), format!("cannot set `{dotted}` inside a non-object")))?;
        if i + 1 == path.len() {
            obj.insert(seg.clone(), value);
            return Ok(());
        }
        cur = obj.entry(seg.clone()).or_insert(Value::Null);
    }
    unreachable!("override path is never empty")
}

/// Build a config from a JSON value plus overrides, then validate it.
pub fn config_from_value(value: Value, overrides: &[String]) -> Result<RunConfig> {
    if !value.is_object() {
        return Err(Error::config("<root>", "config must be a JSON object"));
    }
    let base = deserialize_config(value)?;
    // Overrides land on the fully-populated config so nested defaults survive.
    let mut canonical = serde_json::to_value(&base).expect("config serializes");
    for raw in overrides {
        let (path, v) = parse_override(raw)?;
        set_path(&mut canonical, &path, v)?;
    }
    let cfg = deserialize_config(canonical)?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn parse_config(text: &str, overrides: &[String]) -> Result<RunConfig> {
    let value: Value = serde_json::from_str(text).map_err(|e| Error::config("<json>", e.to_string()))?;
    config_from_value(value, overrides)
}

pub fn load_config(path: &Path, overrides: &[String]) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path)?;
    parse_config(&text, overrides)
}

impl RunConfig {
    pub fn hyper_params(&self) -> HyperParams {
        let (b1, b2) = self.optimizer.default_betas();
        HyperParams {
            lr: self.lr,
            beta1: self.beta1.unwrap_or(b1),
            beta2: self.beta2.unwrap_or(b2),
            eps: self.eps,
            weight_decay: self.weight_decay,
            bias_correction: self.bias_correction,
        }
    }

    pub fn schedule(&self) -> Schedule {
        Schedule {
            alpha_base: self.lr,
            warmup_steps: self.schedule.warmup_steps,
            total_steps: self.schedule.total_steps.unwrap_or(self.total_steps),
            alpha_min: self.schedule.min_lr,
        }
    }

    pub fn optimizer_config(&self) -> OptimizerConfig {
        OptimizerConfig {
            kind: self.optimizer,
            hp: self.hyper_params(),
            schedule: self.schedule(),
            grad_clip_norm: self.grad_clip_norm,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.hyper_params().validate()?;
        let schedule = self.schedule();
        schedule.validate()?;
        if self.total_steps == 0 {
            return Err(Error::config("total_steps", "must be >= 1"));
        }
        if schedule.total_steps < self.total_steps {
            return Err(Error::config(
                "schedule.total_steps",
                format!("{} is shorter than the run ({})", schedule.total_steps, self.total_steps),
            ));
        }
        if self.metric_every == 0 {
            return Err(Error::config("metric_every", "must be >= 1"));
        }
        if self.batch_size == Some(0) {
            return Err(Error::config("batch_size", "must be >= 1"));
        }
        if let Some(c) = self.grad_clip_norm {
            if !(c.is_finite() && c > 0.0) {
                return Err(Error::config("grad_clip_norm", format!("must be > 0, got {c}")));
            }
        }
        if self.pruning_thresholds.iter().any(|t| !(t.is_finite() && *t >= 0.0)) {
            return Err(Error::config("pruning_thresholds", "thresholds must be finite and >= 0"));
        }
        if self.pruning_thresholds.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::config("pruning_thresholds", "thresholds must be sorted ascending"));
        }
        self.threshold.validate()?;
        for (name, g) in &self.groups {
            if let Some(wd) = g.weight_decay {
                if !(wd.is_finite() && wd >= 0.0) {
                    return Err(Error::config(format!("groups.{name}.weight_decay"), "must be >= 0"));
                }
            }
            if let Some(t) = &g.threshold {
                t.validate()
                    .map_err(|e| Error::config(format!("groups.{name}.threshold"), e.to_string()))?;
            }
        }
        Ok(())
    }
}
