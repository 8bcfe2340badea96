//! Straight-line recomputation of the optimizer recursions.

use crate::optim::{HyperParams, OptimizerKind};
use crate::threshold::{ThresholdMode, ThresholdSpec};

#[derive(Clone, Debug)]
pub struct ReplayConfig {
    pub kind: OptimizerKind,
    pub hp: HyperParams,
    /// Effective `λ` of each tensor.
    pub lambdas: Vec<f64>,
    /// Threshold policy of each tensor (ignored by variants without one).
    pub thresholds: Vec<ThresholdSpec>,
    /// `α_t` for every step.
    pub lrs: Vec<f64>,
    pub grad_clip_norm: Option<f64>,
}

/// Replay `grads` from `init` and return every iterate, `init` included.
///
/// `grads[t][k]` is the raw gradient of tensor `k` at step `t`.
pub fn replay_reference(
    cfg: &ReplayConfig,
    init: &[Vec<f64>],
    grads: &[Vec<Vec<f64>>],
) -> Vec<Vec<Vec<f64>>> {
    let kinds = init.len();
    let b1 = cfg.hp.beta1;
    let b2 = cfg.hp.beta2;
    let eps = cfg.hp.eps;

    let mut theta: Vec<Vec<f64>> = init.to_vec();
    let mut m: Vec<Vec<f64>> = init.iter().map(|t| vec![0.0; t.len()]).collect();
    let mut v: Vec<Vec<f64>> = init.iter().map(|t| vec![0.0; t.len()]).collect();
    let mut mu = vec![0.0; kinds];
    let mut mu_started = vec![false; kinds];
    let mut b1_pow = 1.0;
    let mut b2_pow = 1.0;

    let mut trajectory = vec![theta.clone()];
    for (t, step_grads) in grads.iter().enumerate() {
        let alpha = cfg.lrs[t];
        b1_pow *= b1;
        b2_pow *= b2;

        let mut g: Vec<Vec<f64>> = step_grads.clone();
        if let Some(max_norm) = cfg.grad_clip_norm {
            let mut sq = 0.0;
            for tensor in &g {
                for x in tensor {
                    sq += x * x;
                }
            }
            let norm = sq.sqrt();
            if norm > max_norm {
                for tensor in g.iter_mut() {
                    for x in tensor.iter_mut() {
                        *x = *x * max_norm / norm;
                    }
                }
            }
        }

        for k in 0..kinds {
            let n = theta[k].len();
            let lambda = cfg.lambdas[k];
            let spec = &cfg.thresholds[k];

            // Threshold from the pre-update tensor.
            let mut delta = f64::INFINITY;
            if matches!(cfg.kind, OptimizerKind::AdamHdEuler | OptimizerKind::AdamHdProx) {
                let mut total = 0.0;
                for x in &theta[k] {
                    total += x.abs();
                }
                let mean = total / n as f64;
                delta = match spec.mode {
                    ThresholdMode::Unbounded => f64::INFINITY,
                    ThresholdMode::Fixed => spec.delta_fixed.unwrap().max(spec.delta_floor),
                    ThresholdMode::MeanMagnitude => (spec.c * mean).max(spec.delta_floor),
                    ThresholdMode::Ema => {
                        if mu_started[k] {
                            mu[k] = spec.beta0 * mu[k] + (1.0 - spec.beta0) * mean;
                        } else {
                            mu[k] = mean;
                            mu_started[k] = true;
                        }
                        (spec.c * mu[k]).max(spec.delta_floor)
                    }
                };
            }

            for i in 0..n {
                let gi = g[k][i];
                let old = theta[k][i];
                if cfg.kind == OptimizerKind::Lion {
                    let c = b1 * m[k][i] + (1.0 - b1) * gi;
                    let s = if c > 0.0 {
                        1.0
                    } else if c < 0.0 {
                        -1.0
                    } else {
                        0.0
                    };
                    theta[k][i] = old - alpha * (s + lambda * old);
                    m[k][i] = b2 * m[k][i] + (1.0 - b2) * gi;
                    continue;
                }

                m[k][i] = b1 * m[k][i] + (1.0 - b1) * gi;
                v[k][i] = b2 * v[k][i] + (1.0 - b2) * gi * gi;
                let (mh, vh) = if cfg.hp.bias_correction {
                    (m[k][i] / (1.0 - b1_pow), v[k][i] / (1.0 - b2_pow))
                } else {
                    (m[k][i], v[k][i])
                };
                let adam = alpha * mh / (vh.sqrt() + eps);
                let tau = alpha * lambda;

                theta[k][i] = match cfg.kind {
                    OptimizerKind::Adam => old - adam,
                    OptimizerKind::AdamW => old - adam - tau * old,
                    OptimizerKind::AdamHdEuler => {
                        let clipped = if old > delta {
                            delta
                        } else if old < -delta {
                            -delta
                        } else {
                            old
                        };
                        old - adam - tau * clipped
                    }
                    OptimizerKind::AdamHdProx => {
                        let y = old - adam;
                        if y.abs() <= (1.0 + tau) * delta {
                            y / (1.0 + tau)
                        } else if y > 0.0 {
                            y - tau * delta
                        } else {
                            y + tau * delta
                        }
                    }
                    OptimizerKind::Lion => unreachable!(),
                };
            }
        }
        trajectory.push(theta.clone());
    }
    trajectory
}
