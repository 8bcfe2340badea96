use super::{batch_indices, shape_error, Batch, GroupLayout, Problem};
use crate::error::Result;
use crate::rng::SplitMix64;
use crate::tensor::ParamTensor;

/// Mean binary cross-entropy of a linear classifier.
#[derive(Clone, Debug)]
pub struct LogisticProblem {
    /// Row-major `n × d` features.
    features: Vec<f64>,
    labels: Vec<f64>,
    dim: usize,
}

/// Labels are `1[x·w + 0.5·ε > 0]` for a seeded `w ~ N(0, I)` and `ε ~ N(0, 1)`. A draw
/// with a single class is discarded and resampled from the same stream.
pub fn logistic_problem(n_samples: usize, dim: usize, seed: u64) -> Result<LogisticProblem> {
    if dim == 0 {
        return Err(shape_error("dim", "must be >= 1"));
    }
    if n_samples < dim {
        return Err(shape_error(
            "n_samples",
            format!("must be >= dim ({dim}), got {n_samples}"),
        ));
    }
    let mut rng = SplitMix64::new(seed);
    let w: Vec<f64> = (0..dim).map(|_| rng.normal()).collect();
    loop {
        let features: Vec<f64> = (0..n_samples * dim).map(|_| rng.normal()).collect();
        let labels: Vec<f64> = features
            .chunks(dim)
            .map(|x| {
                let z: f64 = x.iter().zip(&w).map(|(a, b)| a * b).sum();
                if z + 0.5 * rng.normal() > 0.0 {
                    1.0
                } else {
                    0.0
                }
            })
            .collect();
        let positives = labels.iter().filter(|&&y| y == 1.0).count();
        if positives > 0 && positives < n_samples {
            return LogisticProblem::from_data(features, labels, dim);
        }
    }
}

impl LogisticProblem {
    pub fn from_data(features: Vec<f64>, labels: Vec<f64>, dim: usize) -> Result<Self> {
        if dim == 0 || features.len() != labels.len() * dim || labels.is_empty() {
            return Err(shape_error(
                "n_samples",
                format!(
                    "{} features do not form {} rows of width {dim}",
                    features.len(),
                    labels.len()
                ),
            ));
        }
        Ok(Self {
            features,
            labels,
            dim,
        })
    }

    pub fn features(&self) -> &[f64] {
        &self.features
    }

    pub fn labels(&self) -> &[f64] {
        &self.labels
    }

    fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.dim..(i + 1) * self.dim]
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `log(1 + e^z)` without overflow.
fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

impl Problem for LogisticProblem {
    fn name(&self) -> &str {
        "logistic"
    }

    fn init_params(&self) -> Vec<ParamTensor> {
        vec![ParamTensor::zeros("w", vec![self.dim])]
    }

    fn groups(&self) -> Vec<GroupLayout> {
        vec![GroupLayout {
            name: "weights".into(),
            tensors: vec![0],
            decay: true,
        }]
    }

    fn loss(&self, params: &[ParamTensor], batch: &Batch) -> f64 {
        let w = &params[0].data;
        let idx = batch_indices(batch, self.labels.len());
        let total: f64 = idx
            .iter()
            .map(|&i| {
                let z: f64 = self.row(i).iter().zip(w).map(|(a, b)| a * b).sum();
                softplus(z) - self.labels[i] * z
            })
            .sum();
        total / idx.len() as f64
    }

    fn grad(&self, params: &[ParamTensor], batch: &Batch) -> Vec<Vec<f64>> {
        let w = &params[0].data;
        let idx = batch_indices(batch, self.labels.len());
        let mut g = vec![0.0; self.dim];
        for &i in &idx {
            let x = self.row(i);
            let z: f64 = x.iter().zip(w).map(|(a, b)| a * b).sum();
            let r = sigmoid(z) - self.labels[i];
            for (gj, xj) in g.iter_mut().zip(x) {
                *gj += r * xj;
            }
        }
        let n = idx.len() as f64;
        g.iter_mut().for_each(|x| *x /= n);
        vec![g]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::{grad_check, ErrorScale};

    #[test]
    fn uninformative_predictor() {
        let p = logistic_problem(200, 5, 1).unwrap();
        let loss = p.loss(&p.init_params(), &Batch::Full);
        assert!((loss - std::f64::consts::LN_2).abs() < 1e-13);
    }

    #[test]
    fn both_classes_present() {
        for seed in 0..20 {
            let p = logistic_problem(8, 8, seed).unwrap();
            let pos = p.labels().iter().filter(|&&y| y == 1.0).count();
            assert!(pos > 0 && pos < 8);
        }
    }

    #[test]
    fn gradient_is_linear_in_features_at_origin() {
        let p = logistic_problem(100, 4, 2).unwrap();
        let doubled = LogisticProblem::from_data(
            p.features().iter().map(|x| 2.0 * x).collect(),
            p.labels().to_vec(),
            4,
        )
        .unwrap();
        let g1 = &p.grad(&p.init_params(), &Batch::Full)[0];
        let g2 = &doubled.grad(&doubled.init_params(), &Batch::Full)[0];
        for (a, b) in g1.iter().zip(g2) {
            assert!((2.0 * a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let p = logistic_problem(64, 6, 3).unwrap();
        let mut rng = SplitMix64::new(4);
        let pts: Vec<Vec<f64>> = (0..25)
            .map(|_| (0..6).map(|_| rng.uniform(-3.0, 3.0)).collect())
            .collect();
        for batch in [Batch::Full, Batch::Sample { seed: 9, size: 16 }] {
            let rep = grad_check(
                |x| p.flat_loss(x, &batch),
                |x| p.flat_grad(x, &batch),
                &pts,
                1e-6,
                |_| false,
                ErrorScale::Absolute,
                1e-6,
            );
            assert!(rep.passed, "{rep:?}");
        }
    }

    #[test]
    fn invalid_shapes() {
        assert!(logistic_problem(3, 5, 0).is_err());
        assert!(LogisticProblem::from_data(vec![1.0; 5], vec![1.0, 0.0], 2).is_err());
    }
}
