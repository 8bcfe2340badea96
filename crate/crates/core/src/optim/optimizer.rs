use serde::{Deserialize, Serialize};

use super::step::{step_adam, step_adamhd_euler, step_adamhd_prox, step_adamw, step_lion};
use super::{clip_global_norm, global_norm, HyperParams, OptimizerKind, Schedule};
use super::{StepOutcome, TensorState};
use crate::error::{check_len, Error, Result};
use crate::regularizer::HuberThreshold;
use crate::tensor::ParamTensor;
use crate::threshold::{peek_threshold, ThresholdSpec};

/// Tensors sharing a decay coefficient and threshold policy.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamGroup {
    pub name: String,
    /// Indices into the parameter list handed to [`Optimizer::step`].
    pub tensors: Vec<usize>,
    /// `Some(0.0)` masks the group out of decay entirely.
    pub lambda_override: Option<f64>,
    pub threshold: ThresholdSpec,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptimizerConfig {
    pub kind: OptimizerKind,
    pub hp: HyperParams,
    pub schedule: Schedule,
    pub grad_clip_norm: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptimState {
    pub tensors: Vec<TensorState>,
    pub step: u64,
}

#[derive(Clone, Debug)]
pub struct StepReport {
    /// Index of the update just applied (0-based).
    pub step: u64,
    pub lr: f64,
    pub grad_norm: f64,
    pub outcomes: Vec<StepOutcome>,
}

pub struct Optimizer {
    config: OptimizerConfig,
    groups: Vec<ParamGroup>,
    /// Group index of each tensor.
    membership: Vec<usize>,
    group_hp: Vec<HyperParams>,
    state: OptimState,
}

impl Optimizer {
    pub fn new(config: OptimizerConfig, groups: Vec<ParamGroup>, params: &[ParamTensor]) -> Result<Self> {
        config.hp.validate()?;
        config.schedule.validate()?;
        if let Some(c) = config.grad_clip_norm {
            if !(c.is_finite() && c > 0.0) {
                return Err(Error::config("grad_clip_norm", format!("must be > 0, got {c}")));
            }
        }
        let mut membership = vec![usize::MAX; params.len()];
        for (gi, group) in groups.iter().enumerate() {
            group.threshold.validate()?;
            for &ti in &group.tensors {
                let slot = membership.get_mut(ti).ok_or_else(|| {
                    Error::config(format!("groups.{}", group.name), format!("no tensor {ti}"))
                })?;
                if *slot != usize::MAX {
                    return Err(Error::config(
                        format!("groups.{}", group.name),
                        format!("tensor `{}` already belongs to another group", params[ti].name),
                    ));
                }
                *slot = gi;
            }
        }
        if let Some(ti) = membership.iter().position(|&g| g == usize::MAX) {
            return Err(Error::config(
                "groups",
                format!("tensor `{}` belongs to no group", params[ti].name),
            ));
        }
        let group_hp = groups
            .iter()
            .map(|g| {
                let lambda = g.lambda_override.unwrap_or(config.hp.weight_decay);
                let hp = config.hp.with_weight_decay(lambda);
                hp.validate().map(|_| hp)
            })
            .collect::<Result<Vec<_>>>()?;
        let state = OptimState {
            tensors: params
                .iter()
                .map(|p| TensorState::new(config.kind, p.len()))
                .collect(),
            step: 0,
        };
        Ok(Self {
            config,
            groups,
            membership,
            group_hp,
            state,
        })
    }

    pub fn config(&self) -> &OptimizerConfig {
        &self.config
    }

    pub fn groups(&self) -> &[ParamGroup] {
        &self.groups
    }

    pub fn state(&self) -> &OptimState {
        &self.state
    }

    /// Effective `λ` for a group.
    pub fn group_lambda(&self, group: usize) -> f64 {
        self.group_hp[group].weight_decay
    }

    /// Learning rate the next update will use.
    pub fn next_lr(&self) -> Result<f64> {
        self.config.schedule.lr_at(self.state.step)
    }

    /// Per-tensor δ the next update would use; `None` for variants without a threshold.
    pub fn peek_deltas(&self, params: &[ParamTensor]) -> Result<Vec<Option<HuberThreshold>>> {
        if !self.config.kind.uses_threshold() {
            return Ok(vec![None; params.len()]);
        }
        params
            .iter()
            .enumerate()
            .map(|(i, p)| {
                let spec = &self.groups[self.membership[i]].threshold;
                peek_threshold(spec, &self.state.tensors[i].threshold, &p.data).map(Some)
            })
            .collect()
    }

    /// One update: clip, moments, learning rate, parameter update, threshold state.
    ///
    /// The whole step is rejected before any state changes if a gradient is malformed.
    pub fn step(&mut self, params: &mut [ParamTensor], mut grads: Vec<Vec<f64>>) -> Result<StepReport> {
        check_len(params.len(), grads.len())?;
        for (p, g) in params.iter().zip(&grads) {
            check_len(p.len(), g.len())?;
            if let Some(index) = g.iter().position(|x| !x.is_finite()) {
                return Err(Error::NonFiniteGradient {
                    tensor: p.name.clone(),
                    index,
                });
            }
        }
        let grad_norm = match self.config.grad_clip_norm {
            Some(max) => clip_global_norm(&mut grads, max)?,
            None => global_norm(&grads),
        };
        let t = self.state.step;
        let lr = self.config.schedule.lr_at(t)?;
        let kind = self.config.kind;
        let mut outcomes = Vec::with_capacity(params.len());
        for (i, (p, g)) in params.iter_mut().zip(&grads).enumerate() {
            let gi = self.membership[i];
            let hp = &self.group_hp[gi];
            let spec = &self.groups[gi].threshold;
            let st = &mut self.state.tensors[i];
            let theta = &mut p.data;
            let out = match kind {
                OptimizerKind::Adam => step_adam(theta, g, st, hp, lr),
                OptimizerKind::AdamW => step_adamw(theta, g, st, hp, lr),
                OptimizerKind::AdamHdEuler => step_adamhd_euler(theta, g, st, hp, lr, spec),
                OptimizerKind::AdamHdProx => step_adamhd_prox(theta, g, st, hp, lr, spec),
                OptimizerKind::Lion => step_lion(theta, g, st, hp, lr),
            };
            outcomes.push(out.map_err(|e| match e {
                Error::NonFiniteGradient { index, .. } => Error::NonFiniteGradient {
                    tensor: p.name.clone(),
                    index,
                },
                other => other,
            })?);
        }
        self.state.step += 1;
        Ok(StepReport {
            step: t,
            lr,
            grad_norm,
            outcomes,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params() -> Vec<ParamTensor> {
        vec![
            ParamTensor::new("w", vec![2], vec![1.0, -2.0]),
            ParamTensor::new("b", vec![1], vec![0.5]),
        ]
    }

    fn config(kind: OptimizerKind) -> OptimizerConfig {
        OptimizerConfig {
            kind,
            hp: HyperParams {
                lr: 0.01,
                weight_decay: 0.5,
                ..HyperParams::default()
            },
            schedule: Schedule::constant(0.01, 100),
            grad_clip_norm: Some(1.0),
        }
    }

    fn groups() -> Vec<ParamGroup> {
        vec![
            ParamGroup {
                name: "weights".into(),
                tensors: vec![0],
                lambda_override: None,
                threshold: ThresholdSpec::mean_magnitude(1.0),
            },
            ParamGroup {
                name: "biases".into(),
                tensors: vec![1],
                lambda_override: Some(0.0),
                threshold: ThresholdSpec::default(),
            },
        ]
    }

    #[test]
    fn group_membership_is_validated() {
        let p = params();
        let mut g = groups();
        g[1].tensors = vec![0];
        assert!(Optimizer::new(config(OptimizerKind::AdamW), g, &p).is_err());
        let mut g = groups();
        g[1].tensors.clear();
        assert!(Optimizer::new(config(OptimizerKind::AdamW), g, &p).is_err());
        let mut g = groups();
        g[1].tensors = vec![7];
        assert!(Optimizer::new(config(OptimizerKind::AdamW), g, &p).is_err());
    }

    #[test]
    fn masked_group_gets_no_decay() {
        for kind in OptimizerKind::ALL {
            let mut p = params();
            let mut opt = Optimizer::new(config(kind), groups(), &p).unwrap();
            let report = opt.step(&mut p, vec![vec![0.0, 0.0], vec![0.0]]).unwrap();
            assert_eq!(p[1].data, vec![0.5], "{kind}");
            assert!(report.outcomes[1].decay.iter().all(|&d| d == 0.0));
            if kind != OptimizerKind::Adam {
                assert_ne!(p[0].data, vec![1.0, -2.0], "{kind}");
            }
        }
    }

    #[test]
    fn step_is_atomic_on_bad_gradient() {
        let mut p = params();
        let mut opt = Optimizer::new(config(OptimizerKind::AdamHdProx), groups(), &p).unwrap();
        let err = opt
            .step(&mut p, vec![vec![0.1, 0.2], vec![f64::INFINITY]])
            .unwrap_err();
        assert!(matches!(err, Error::NonFiniteGradient { ref tensor, index: 0 } if tensor == "b"));
        assert_eq!(p, params());
        assert_eq!(opt.state().step, 0);
        assert!(opt.step(&mut p, vec![vec![0.1], vec![0.0]]).is_err());
    }

    #[test]
    fn clipping_reports_raw_norm() {
        let mut p = params();
        let mut opt = Optimizer::new(config(OptimizerKind::Adam), groups(), &p).unwrap();
        let r = opt.step(&mut p, vec![vec![3.0, 0.0], vec![4.0]]).unwrap();
        assert_eq!(r.grad_norm, 5.0);
        assert_eq!(r.step, 0);
        assert_eq!(opt.state().step, 1);
    }

    #[test]
    fn deltas_follow_current_parameters() {
        let p = params();
        let opt = Optimizer::new(config(OptimizerKind::AdamHdEuler), groups(), &p).unwrap();
        let d = opt.peek_deltas(&p).unwrap();
        assert_eq!(d[0], Some(HuberThreshold::Finite(1.5)));
        let opt = Optimizer::new(config(OptimizerKind::AdamW), groups(), &p).unwrap();
        assert_eq!(opt.peek_deltas(&p).unwrap(), vec![None, None]);
    }
}
