//! Closed-form proximal map of the scaled Huber penalty.
//!
//! `prox_{τH_δ}(y) = argmin_x ½(x − y)² + τ·H_δ(x)` is a scaled shrink `y/(1+τ)` while
//! `|y| ≤ (1+τ)δ` and a constant shift `y − τδ·sign(y)` beyond it.

use crate::error::{Error, Result};
use crate::regularizer::{Deltas, HuberThreshold};

/// Result of one scalar proximal step, keeping the decay displacement `y − x` as it was
/// computed rather than recovering it by subtraction.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ProxOutcome {
    pub value: f64,
    pub displacement: f64,
}

/// Unchecked scalar prox. `tau == 0` is the identity regardless of `delta`.
#[inline]
pub(crate) fn prox_scalar(y: f64, tau: f64, delta: HuberThreshold) -> ProxOutcome {
    if tau == 0.0 {
        return ProxOutcome {
            value: y,
            displacement: 0.0,
        };
    }
    let scale = 1.0 + tau;
    match delta {
        HuberThreshold::Finite(d) if y.abs() > scale * d => {
            let shift = (tau * d).copysign(y);
            ProxOutcome {
                value: y - shift,
                displacement: shift,
            }
        }
        _ => {
            let value = y / scale;
            ProxOutcome {
                value,
                displacement: y - value,
            }
        }
    }
}

fn check_args(tau: f64) -> Result<()> {
    if tau.is_finite() && tau >= 0.0 {
        Ok(())
    } else {
        Err(Error::domain(format!("prox step tau must be >= 0, got {tau}")))
    }
}

pub fn prox_huber(y: f64, tau: f64, delta: f64) -> Result<f64> {
    if !y.is_finite() {
        return Err(Error::domain(format!("prox argument must be finite, got {y}")));
    }
    check_args(tau)?;
    let delta = HuberThreshold::new(delta)?;
    Ok(prox_scalar(y, tau, delta).value)
}

/// Elementwise prox over a tensor. Output has the input's length.
pub fn prox_apply(theta_tilde: &[f64], tau: f64, delta: Deltas<'_>) -> Result<Vec<f64>> {
    check_args(tau)?;
    let ds = delta.expand(theta_tilde.len())?;
    theta_tilde
        .iter()
        .zip(ds)
        .map(|(&y, d)| {
            if y.is_finite() {
                Ok(prox_scalar(y, tau, d).value)
            } else {
                Err(Error::domain(format!("prox argument must be finite, got {y}")))
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn scalar_branches() {
        assert!((prox_huber(0.5, 0.1, 1.0).unwrap() - 0.5 / 1.1).abs() < 1e-15);
        assert_eq!(prox_huber(0.5, 0.1, 1.0).unwrap(), 0.5 / 1.1);
        assert!((prox_huber(2.0, 0.1, 1.0).unwrap() - 1.9).abs() < 1e-15);
        assert!((prox_huber(-2.0, 0.1, 1.0).unwrap() + 1.9).abs() < 1e-15);
        // On the boundary |y| = (1+τ)δ both branches give δ.
        let b = prox_huber(1.1, 0.1, 1.0).unwrap();
        assert!((b - 1.0).abs() < 1e-15);
        assert!(((1.1 - 0.1 * 1.0) - 1.0f64).abs() < 1e-15);
    }

    #[test]
    fn zero_tau_is_identity() {
        for &y in &[-3.0, 0.0, 1e-300, 42.0] {
            assert_eq!(prox_huber(y, 0.0, 1e-9).unwrap(), y);
        }
    }

    #[test]
    fn errors() {
        assert!(prox_huber(f64::NAN, 0.1, 1.0).is_err());
        assert!(prox_huber(1.0, -0.1, 1.0).is_err());
        assert!(prox_huber(1.0, 0.1, 0.0).is_err());
        assert!(prox_apply(&[1.0, 2.0], 0.1, Deltas::PerElement(&[1.0])).is_err());
    }

    #[test]
    fn tensor_application() {
        let one = HuberThreshold::Finite(1.0);
        assert_eq!(prox_apply(&[0.0, 0.0], 0.3, one.into()).unwrap(), vec![0.0, 0.0]);
        let out = prox_apply(&[0.5, 2.0], 0.1, one.into()).unwrap();
        assert_eq!(out[0], 0.5 / 1.1);
        assert!((out[1] - 1.9).abs() < 1e-15);
        let x = [3.0, -0.2, 100.0];
        let l2 = prox_apply(&x, 0.25, HuberThreshold::Unbounded.into()).unwrap();
        for (o, xi) in l2.iter().zip(x) {
            assert_eq!(*o, xi / 1.25);
        }
        let per = prox_apply(&[2.0, 2.0], 0.1, Deltas::PerElement(&[1.0, 5.0])).unwrap();
        assert!((per[0] - 1.9).abs() < 1e-15);
        assert_eq!(per[1], 2.0 / 1.1);
    }

    #[test]
    fn vanishing_delta_is_identity() {
        let delta = 1e-12;
        for &tau in &[0.01, 0.5, 2.0] {
            for &y in &[1e-6, -1e-6, 0.3, -7.0, 1e3] {
                let p = prox_huber(y, tau, delta).unwrap();
                // Exact shift is τδ; allow the rounding of y − τδ itself.
                let ulp = 2.0 * f64::EPSILON * y.abs();
                assert!((p - y).abs() <= tau * 1e-12 + ulp, "y={y} tau={tau}");
            }
        }
    }

    proptest! {
        #[test]
        fn nonexpansive(y1 in -10.0f64..10.0, y2 in -10.0f64..10.0, tau in 1e-6f64..2.0, delta in 1e-6f64..5.0) {
            let p1 = prox_huber(y1, tau, delta).unwrap();
            let p2 = prox_huber(y2, tau, delta).unwrap();
            prop_assert!((p1 - p2).abs() <= (y1 - y2).abs() + 1e-12);
        }

        #[test]
        fn displacement_capped(y in -10.0f64..10.0, tau in 1e-6f64..2.0, delta in 1e-6f64..5.0) {
            let p = prox_huber(y, tau, delta).unwrap();
            let cap = (tau / (1.0 + tau) * y.abs()).min(tau * delta);
            prop_assert!((p - y).abs() <= cap + 1e-12);
        }

        #[test]
        fn sign_and_magnitude(y in -10.0f64..10.0, tau in 0.0f64..2.0, delta in 1e-6f64..5.0) {
            let p = prox_huber(y, tau, delta).unwrap();
            prop_assert!(p == 0.0 || p.signum() == y.signum());
            prop_assert!(p.abs() <= y.abs());
        }

        #[test]
        fn shift_branch_never_zero(delta in 1e-6f64..5.0, tau in 1e-6f64..2.0, excess in 1e-9f64..10.0, neg in any::<bool>()) {
            let mag = (1.0 + tau) * delta * (1.0 + excess);
            let y = if neg { -mag } else { mag };
            let out = prox_scalar(y, tau, HuberThreshold::Finite(delta));
            prop_assert!(out.value != 0.0);
            prop_assert_eq!(out.displacement, (tau * delta).copysign(y));
        }
    }
}
