use serde::{Deserialize, Serialize};

use super::{HyperParams, OptimizerKind};
use crate::error::{check_len, Error, Result};
use crate::proximal::prox_scalar;
use crate::regularizer::HuberThreshold;
use crate::threshold::{update_threshold, ThresholdSpec, ThresholdState};

/// First/second moments of one tensor. Lion keeps only `m` (its `v` stays empty).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MomentState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub step: u64,
}

impl MomentState {
    pub fn zeros(len: usize) -> Self {
        Self {
            m: vec![0.0; len],
            v: vec![0.0; len],
            step: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TensorState {
    pub moments: MomentState,
    pub threshold: ThresholdState,
}

impl TensorState {
    pub fn new(kind: OptimizerKind, len: usize) -> Self {
        let mut moments = MomentState::zeros(len);
        if kind == OptimizerKind::Lion {
            moments.v.clear();
        }
        Self {
            moments,
            threshold: ThresholdState::default(),
        }
    }
}

/// How one step moved a tensor.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct StepOutcome {
    /// `α_t·m̂/(√v̂+ε)` (Lion: `α_t·sign(c_t)`).
    pub adam_update: Vec<f64>,
    /// The decay displacement subtracted after (or, for the prox, within) the adaptive step.
    pub decay: Vec<f64>,
    pub delta: Option<HuberThreshold>,
}

/// `sign` with `sign(0) = 0`.
#[inline]
pub fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

fn check_gradient(theta: &[f64], g: &[f64]) -> Result<()> {
    check_len(theta.len(), g.len())?;
    match g.iter().position(|x| !x.is_finite()) {
        Some(index) => Err(Error::NonFiniteGradient {
            tensor: String::new(),
            index,
        }),
        None => Ok(()),
    }
}

/// Advance `m_t`, `v_t` and return the moments used by the update, bias-corrected when the
/// hyperparameters ask for it. Raw moments persist in `state`.
pub fn adam_moments(
    state: &mut MomentState,
    g: &[f64],
    hp: &HyperParams,
) -> Result<(Vec<f64>, Vec<f64>)> {
    check_gradient(&state.m, g)?;
    check_len(state.m.len(), state.v.len())?;
    state.step += 1;
    for ((m, v), &gi) in state.m.iter_mut().zip(state.v.iter_mut()).zip(g) {
        *m = hp.beta1 * *m + (1.0 - hp.beta1) * gi;
        *v = hp.beta2 * *v + (1.0 - hp.beta2) * gi * gi;
    }
    if hp.bias_correction {
        let t = state.step as i32;
        let c1 = 1.0 - hp.beta1.powi(t);
        let c2 = 1.0 - hp.beta2.powi(t);
        Ok((
            state.m.iter().map(|m| m / c1).collect(),
            state.v.iter().map(|v| v / c2).collect(),
        ))
    } else {
        Ok((state.m.clone(), state.v.clone()))
    }
}

/// Decay sub-update attached to the adaptive step.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum DecayRule {
    None,
    /// `θ_{t+1} = θ_t − u − αλ·θ_t`.
    L2 { lambda: f64 },
    /// `θ_{t+1} = θ_t − u − αλ·clip(θ_t, −δ, δ)`.
    HuberEuler { lambda: f64, delta: HuberThreshold },
    /// `θ_{t+1} = prox_{αλH_δ}(θ_t − u)`.
    HuberProx { lambda: f64, delta: HuberThreshold },
}

/// Apply `u = α·m̂/(√v̂+ε)` and the decay rule to `theta` in place.
///
/// A decay rule whose `α·λ` is zero is skipped outright, so masked groups are bitwise
/// identical to plain Adam.
pub fn apply_update(
    theta: &mut [f64],
    m_hat: &[f64],
    v_hat: &[f64],
    eps: f64,
    alpha: f64,
    rule: DecayRule,
) -> StepOutcome {
    debug_assert_eq!(theta.len(), m_hat.len());
    debug_assert_eq!(theta.len(), v_hat.len());
    let n = theta.len();
    let mut adam_update = Vec::with_capacity(n);
    let mut decay = vec![0.0; n];
    let tau = match rule {
        DecayRule::None => 0.0,
        DecayRule::L2 { lambda }
        | DecayRule::HuberEuler { lambda, .. }
        | DecayRule::HuberProx { lambda, .. } => alpha * lambda,
    };
    for i in 0..n {
        let u = alpha * (m_hat[i] / (v_hat[i].sqrt() + eps));
        adam_update.push(u);
        let old = theta[i];
        if tau == 0.0 {
            theta[i] = old - u;
            continue;
        }
        match rule {
            DecayRule::None => unreachable!(),
            DecayRule::L2 { .. } => {
                decay[i] = tau * old;
                theta[i] = (old - u) - decay[i];
            }
            DecayRule::HuberEuler { delta, .. } => {
                decay[i] = tau * delta.clip(old);
                theta[i] = (old - u) - decay[i];
            }
            DecayRule::HuberProx { delta, .. } => {
                let out = prox_scalar(old - u, tau, delta);
                decay[i] = out.displacement;
                theta[i] = out.value;
            }
        }
    }
    let delta = match rule {
        DecayRule::HuberEuler { delta, .. } | DecayRule::HuberProx { delta, .. } => Some(delta),
        _ => None,
    };
    StepOutcome {
        adam_update,
        decay,
        delta,
    }
}

fn adaptive_step(
    theta: &mut [f64],
    g: &[f64],
    state: &mut TensorState,
    hp: &HyperParams,
    alpha: f64,
    rule: impl FnOnce(&[f64], &mut ThresholdState) -> Result<DecayRule>,
) -> Result<StepOutcome> {
    check_gradient(theta, g)?;
    check_len(theta.len(), state.moments.m.len())?;
    // δ_t is read from θ_t before anything moves.
    let rule = rule(theta, &mut state.threshold)?;
    let (m_hat, v_hat) = adam_moments(&mut state.moments, g, hp)?;
    Ok(apply_update(theta, &m_hat, &v_hat, hp.eps, alpha, rule))
}

/// `θ_{t+1} = θ_t − α_t·m̂/(√v̂+ε)`.
pub fn step_adam(
    theta: &mut [f64],
    g: &[f64],
    state: &mut TensorState,
    hp: &HyperParams,
    alpha: f64,
) -> Result<StepOutcome> {
    adaptive_step(theta, g, state, hp, alpha, |_, _| Ok(DecayRule::None))
}

/// Adam plus decoupled L2 decay `α_t·λ·θ_t`.
pub fn step_adamw(
    theta: &mut [f64],
    g: &[f64],
    state: &mut TensorState,
    hp: &HyperParams,
    alpha: f64,
) -> Result<StepOutcome> {
    let lambda = hp.weight_decay;
    adaptive_step(theta, g, state, hp, alpha, |_, _| Ok(DecayRule::L2 { lambda }))
}

/// Adam plus decoupled Huber decay `α_t·λ·clip(θ_t, −δ_t, δ_t)`.
pub fn step_adamhd_euler(
    theta: &mut [f64],
    g: &[f64],
    state: &mut TensorState,
    hp: &HyperParams,
    alpha: f64,
    spec: &ThresholdSpec,
) -> Result<StepOutcome> {
    let lambda = hp.weight_decay;
    adaptive_step(theta, g, state, hp, alpha, |theta, ts| {
        let delta = update_threshold(spec, ts, theta)?;
        Ok(DecayRule::HuberEuler { lambda, delta })
    })
}

/// Adam step to `θ̃_t`, then the Huber prox with `τ = α_t·λ`.
pub fn step_adamhd_prox(
    theta: &mut [f64],
    g: &[f64],
    state: &mut TensorState,
    hp: &HyperParams,
    alpha: f64,
    spec: &ThresholdSpec,
) -> Result<StepOutcome> {
    let lambda = hp.weight_decay;
    adaptive_step(theta, g, state, hp, alpha, |theta, ts| {
        let delta = update_threshold(spec, ts, theta)?;
        Ok(DecayRule::HuberProx { lambda, delta })
    })
}

/// Lion: `c = β1·m + (1−β1)·g`, `θ ← θ − α·(sign(c) + λθ)`, `m ← β2·m + (1−β2)·g`.
pub fn step_lion(
    theta: &mut [f64],
    g: &[f64],
    state: &mut TensorState,
    hp: &HyperParams,
    alpha: f64,
) -> Result<StepOutcome> {
    check_gradient(theta, g)?;
    check_len(theta.len(), state.moments.m.len())?;
    let n = theta.len();
    let lambda = hp.weight_decay;
    let mut adam_update = Vec::with_capacity(n);
    let mut decay = Vec::with_capacity(n);
    let m = &mut state.moments.m;
    for i in 0..n {
        let c = hp.beta1 * m[i] + (1.0 - hp.beta1) * g[i];
        let s = sign(c);
        adam_update.push(alpha * s);
        decay.push(alpha * (lambda * theta[i]));
        theta[i] -= alpha * (s + lambda * theta[i]);
        m[i] = hp.beta2 * m[i] + (1.0 - hp.beta2) * g[i];
    }
    state.moments.step += 1;
    Ok(StepOutcome {
        adam_update,
        decay,
        delta: None,
    })
}
