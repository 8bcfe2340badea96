use serde::{Deserialize, Serialize};

use super::TracePoint;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TargetHit {
    /// First step whose loss is at or below the target.
    pub step: Option<u64>,
    /// Pruning sparsity profile at that step.
    pub sparsity: Option<Vec<f64>>,
    pub best_loss: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub target_loss: f64,
    pub a: TargetHit,
    pub b: TargetHit,
    /// `steps_a / steps_b` when both runs reach the target (1 when both start there).
    pub ratio: Option<f64>,
}

impl Comparison {
    /// `sparsity_a − sparsity_b` per threshold, when both runs reach the target.
    pub fn sparsity_delta(&self) -> Option<Vec<f64>> {
        let (a, b) = (self.a.sparsity.as_ref()?, self.b.sparsity.as_ref()?);
        Some(a.iter().zip(b).map(|(x, y)| x - y).collect())
    }
}

fn hit(trace: &[TracePoint], target: f64) -> TargetHit {
    let first = trace.iter().find(|p| p.loss <= target);
    TargetHit {
        step: first.map(|p| p.step),
        sparsity: first.map(|p| p.sparsity.clone()),
        best_loss: trace.iter().map(|p| p.loss).fold(f64::INFINITY, f64::min),
    }
}

/// Compare two runs at the first step each reaches `target` loss.
pub fn matched_loss_compare(a: &[TracePoint], b: &[TracePoint], target: f64) -> Comparison {
    let (ha, hb) = (hit(a, target), hit(b, target));
    let ratio = match (ha.step, hb.step) {
        (Some(0), Some(0)) => Some(1.0),
        (Some(sa), Some(sb)) if sb > 0 => Some(sa as f64 / sb as f64),
        _ => None,
    };
    Comparison {
        target_loss: target,
        a: ha,
        b: hb,
        ratio,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn trace(losses: &[f64]) -> Vec<TracePoint> {
        losses
            .iter()
            .enumerate()
            .map(|(i, &l)| TracePoint {
                step: i as u64,
                loss: l,
                sparsity: vec![i as f64 / 10.0],
            })
            .collect()
    }

    #[test]
    fn identical_runs() {
        let t = trace(&[4.0, 2.0, 1.0, 0.5]);
        let c = matched_loss_compare(&t, &t, 1.0);
        assert_eq!(c.ratio, Some(1.0));
        assert_eq!(c.a.step, Some(2));
        assert_eq!(c.sparsity_delta(), Some(vec![0.0]));
    }

    #[test]
    fn faster_run_has_smaller_ratio() {
        let a = trace(&[4.0, 0.9, 0.5]);
        let b = trace(&[4.0, 3.0, 2.0, 1.5, 0.9]);
        let c = matched_loss_compare(&a, &b, 1.0);
        assert_eq!(c.ratio, Some(0.25));
        assert_eq!(c.a.sparsity, Some(vec![0.1]));
        assert_eq!(c.b.sparsity, Some(vec![0.4]));
    }

    #[test]
    fn unreached_target() {
        let a = trace(&[4.0, 2.0]);
        let b = trace(&[3.0, 1.0]);
        let c = matched_loss_compare(&a, &b, 0.1);
        assert_eq!((c.a.step, c.b.step, c.ratio), (None, None, None));
        assert_eq!(c.b.best_loss, 1.0);
        assert!(c.sparsity_delta().is_none());
    }
}
