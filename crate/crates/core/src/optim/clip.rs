use crate::error::{Error, Result};

/// Joint ℓ2 norm over every tensor.
pub fn global_norm(grads: &[Vec<f64>]) -> f64 {
    grads
        .iter()
        .flat_map(|g| g.iter())
        .map(|x| x * x)
        .sum::<f64>()
        .sqrt()
}

/// Rescale all gradients jointly so their global norm is at most `max_norm`.
///
/// Returns the pre-clip norm. Each coordinate becomes `g·max_norm/norm`, evaluated in that
/// order so that exact ratios (3-4-5) come out exact.
pub fn clip_global_norm(grads: &mut [Vec<f64>], max_norm: f64) -> Result<f64> {
    if !(max_norm.is_finite() && max_norm > 0.0) {
        return Err(Error::domain(format!("max_norm must be > 0, got {max_norm}")));
    }
    let norm = global_norm(grads);
    if !norm.is_finite() {
        return Err(Error::NonFiniteNorm(norm));
    }
    if norm > max_norm {
        for x in grads.iter_mut().flat_map(|g| g.iter_mut()) {
            *x = *x * max_norm / norm;
        }
    }
    Ok(norm)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn three_four_five() {
        let mut g = vec![vec![3.0], vec![4.0]];
        let norm = clip_global_norm(&mut g, 1.0).unwrap();
        assert_eq!(norm, 5.0);
        assert_eq!(g, vec![vec![0.6], vec![0.8]]);
    }

    #[test]
    fn below_max_is_identity() {
        let mut g = vec![vec![0.3, -0.1], vec![0.2]];
        let before = g.clone();
        clip_global_norm(&mut g, 1.0).unwrap();
        assert_eq!(g, before);
    }

    #[test]
    fn rejects_non_finite() {
        let mut g = vec![vec![f64::NAN]];
        assert!(matches!(clip_global_norm(&mut g, 1.0), Err(Error::NonFiniteNorm(_))));
        let mut g = vec![vec![1.0]];
        assert!(clip_global_norm(&mut g, 0.0).is_err());
    }

    proptest! {
        #[test]
        fn post_clip_norm(gs in prop::collection::vec(prop::collection::vec(-10.0f64..10.0, 1..8), 1..5), max in 0.01f64..5.0) {
            let mut g = gs.clone();
            let raw = clip_global_norm(&mut g, max).unwrap();
            prop_assert!((global_norm(&g) - raw.min(max)).abs() <= 1e-12);
        }
    }
}
