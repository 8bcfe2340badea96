//! Huber penalty on weights.
//!
//! `H_δ(a) = ½a²` for `|a| ≤ δ` and `δ(|a| − ½δ)` beyond. Its derivative is the clip of `a`
//! to `[−δ, δ]`, so the regularization force on any coordinate never exceeds `δ`.

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};

/// Breakpoint of the Huber penalty.
///
/// `Unbounded` stands for `δ = +∞` (pure quadratic decay) and never enters arithmetic, so
/// clipping against it is exactly the identity.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HuberThreshold {
    Finite(f64),
    Unbounded,
}

impl HuberThreshold {
    /// Validates `delta > 0`; `+∞` maps to [`HuberThreshold::Unbounded`].
    pub fn new(delta: f64) -> Result<Self> {
        if delta == f64::INFINITY {
            Ok(HuberThreshold::Unbounded)
        } else if delta.is_finite() && delta > 0.0 {
            Ok(HuberThreshold::Finite(delta))
        } else {
            Err(Error::domain(format!("huber threshold must be positive, got {delta}")))
        }
    }

    pub fn as_f64(self) -> f64 {
        match self {
            HuberThreshold::Finite(d) => d,
            HuberThreshold::Unbounded => f64::INFINITY,
        }
    }

    #[inline]
    pub fn clip(self, a: f64) -> f64 {
        match self {
            HuberThreshold::Finite(d) if a > d => d,
            HuberThreshold::Finite(d) if a < -d => -d,
            _ => a,
        }
    }

    #[inline]
    pub fn penalty(self, a: f64) -> f64 {
        match self {
            HuberThreshold::Finite(d) if a.abs() > d => d * (a.abs() - 0.5 * d),
            _ => 0.5 * a * a,
        }
    }
}

fn check_point(a: f64) -> Result<()> {
    if a.is_finite() {
        Ok(())
    } else {
        Err(Error::domain(format!("huber argument must be finite, got {a}")))
    }
}

pub fn huber(a: f64, delta: f64) -> Result<f64> {
    check_point(a)?;
    Ok(HuberThreshold::new(delta)?.penalty(a))
}

/// Gradient of [`huber`]: `clip(a, −δ, δ)`.
pub fn huber_grad(a: f64, delta: f64) -> Result<f64> {
    check_point(a)?;
    Ok(HuberThreshold::new(delta)?.clip(a))
}

/// Breakpoints for a whole tensor: one shared value or one per coordinate.
#[derive(Clone, Copy, Debug)]
pub enum Deltas<'a> {
    Tensor(HuberThreshold),
    PerElement(&'a [f64]),
}

impl Deltas<'_> {
    /// Resolve into an iterator of per-coordinate thresholds for a tensor of length `n`.
    pub(crate) fn expand(&self, n: usize) -> Result<Vec<HuberThreshold>> {
        match *self {
            Deltas::Tensor(t) => Ok(vec![t; n]),
            Deltas::PerElement(ds) => {
                check_len(n, ds.len())?;
                ds.iter().map(|&d| HuberThreshold::new(d)).collect()
            }
        }
    }
}

impl From<HuberThreshold> for Deltas<'_> {
    fn from(t: HuberThreshold) -> Self {
        Deltas::Tensor(t)
    }
}

/// `R_δ(θ) = Σ H_δ(θ_i)`.
pub fn regularizer_value(theta: &[f64], delta: Deltas<'_>) -> Result<f64> {
    let ds = delta.expand(theta.len())?;
    theta.iter().try_for_each(|&a| check_point(a))?;
    Ok(theta.iter().zip(&ds).map(|(&a, d)| d.penalty(a)).sum())
}

/// `∇R_δ(θ) = clip(θ, −δ, δ)` elementwise.
pub fn regularizer_grad(theta: &[f64], delta: Deltas<'_>) -> Result<Vec<f64>> {
    let ds = delta.expand(theta.len())?;
    theta.iter().try_for_each(|&a| check_point(a))?;
    Ok(theta.iter().zip(&ds).map(|(&a, d)| d.clip(a)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn scalar_values() {
        assert_eq!(huber(0.0, 1.0).unwrap(), 0.0);
        assert_eq!(huber(0.5, 1.0).unwrap(), 0.125);
        assert_eq!(huber(2.0, 1.0).unwrap(), 1.5);
        assert_eq!(huber(-2.0, 1.0).unwrap(), 1.5);
        // Breakpoint: both branch formulas give ½.
        assert_eq!(huber(1.0, 1.0).unwrap(), 0.5);
        assert_eq!(1.0 * (1.0 - 0.5 * 1.0), 0.5);
    }

    #[test]
    fn gradient_is_clip() {
        assert_eq!(huber_grad(0.5, 1.0).unwrap(), 0.5);
        assert_eq!(huber_grad(-3.0, 1.0).unwrap(), -1.0);
        assert_eq!(huber_grad(3.0, 1.0).unwrap(), 1.0);
        assert_eq!(huber_grad(1.0, 1.0).unwrap(), 1.0);
    }

    #[test]
    fn domain_errors() {
        assert!(huber(f64::NAN, 1.0).is_err());
        assert!(huber(f64::INFINITY, 1.0).is_err());
        assert!(huber(1.0, 0.0).is_err());
        assert!(huber(1.0, -1.0).is_err());
        assert!(huber_grad(1.0, f64::NAN).is_err());
        assert!(regularizer_value(&[1.0, 2.0], Deltas::PerElement(&[1.0])).is_err());
    }

    #[test]
    fn unbounded_is_quadratic() {
        let t = HuberThreshold::new(f64::INFINITY).unwrap();
        assert_eq!(t, HuberThreshold::Unbounded);
        assert_eq!(t.clip(1e300), 1e300);
        assert_eq!(t.penalty(4.0), 8.0);
    }

    #[test]
    fn summed_regularizer() {
        let one = HuberThreshold::Finite(1.0);
        assert_eq!(regularizer_value(&[0.0, 0.0, 0.0], one.into()).unwrap(), 0.0);
        assert_eq!(regularizer_value(&[0.5, 2.0], one.into()).unwrap(), 1.625);
        let per = regularizer_value(&[0.5, 2.0], Deltas::PerElement(&[1.0, 4.0])).unwrap();
        assert_eq!(per, 0.125 + 2.0);
        assert_eq!(
            regularizer_grad(&[0.5, -2.0], one.into()).unwrap(),
            vec![0.5, -1.0]
        );
    }

    #[test]
    fn breakpoint_is_continuous_and_smooth() {
        // Left and right values straddling δ differ only by the linear term 2hδ (the slope
        // is continuous at the kink), leaving an O(h²) remainder.
        for &delta in &[1e-3, 0.3, 1.0, 7.5] {
            let h = 1e-9;
            let jump = huber(delta + h, delta).unwrap() - huber(delta - h, delta).unwrap();
            let remainder = (jump - 2.0 * h * delta).abs();
            assert!(remainder / (delta * delta) <= 1e-12, "delta={delta} r={remainder}");
        }
    }

    proptest! {
        #[test]
        fn gradient_bounded_by_delta(a in -1e6f64..1e6, delta in 1e-6f64..1e3) {
            prop_assert!(huber_grad(a, delta).unwrap().abs() <= delta);
            prop_assert!(huber(a, delta).unwrap() >= 0.0);
        }

        #[test]
        fn l2_limit_is_exact(theta in prop::collection::vec(-5.0f64..5.0, 1..32), slack in 0.0f64..3.0) {
            let max = theta.iter().fold(0.0f64, |m, x| m.max(x.abs()));
            let delta = HuberThreshold::new(max + slack + 1e-12).unwrap();
            let half_sq: f64 = theta.iter().map(|x| 0.5 * x * x).sum();
            prop_assert_eq!(regularizer_value(&theta, delta.into()).unwrap(), half_sq);
        }

        #[test]
        fn zero_iff_origin(theta in prop::collection::vec(-1.0f64..1.0, 1..16)) {
            let v = regularizer_value(&theta, HuberThreshold::Finite(0.5).into()).unwrap();
            prop_assert_eq!(v == 0.0, theta.iter().all(|&x| x == 0.0));
        }
    }
}
