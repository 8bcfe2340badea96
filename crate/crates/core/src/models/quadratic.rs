use super::{shape_error, Batch, GroupLayout, Problem};
use crate::error::Result;
use crate::rng::SplitMix64;
use crate::tensor::ParamTensor;

/// Fraction of optimum coordinates drawn from the wide component.
pub const HEAVY_FRACTION: f64 = 0.1;
/// Scale of the wide component relative to the bulk.
pub const HEAVY_SCALE: f64 = 10.0;
const BULK_SCALE: f64 = 0.1;

/// `½(θ − θ*)ᵀ D (θ − θ*)` with diagonal, log-spaced `D ∈ [1, κ]`.
///
/// θ* is mostly small (`N(0, 0.1²)`) with a heavy tail: a fixed 10% of coordinates, chosen at
/// random, are drawn at 10× that scale.
#[derive(Clone, Debug)]
pub struct QuadraticProblem {
    curvature: Vec<f64>,
    optimum: Vec<f64>,
    heavy: Vec<bool>,
    noise: f64,
    init: Vec<f64>,
    seed: u64,
}

pub fn quadratic_problem(dim: usize, condition_number: f64, seed: u64) -> Result<QuadraticProblem> {
    if dim < 2 {
        return Err(shape_error("dim", format!("must be >= 2, got {dim}")));
    }
    if !(condition_number.is_finite() && condition_number >= 1.0) {
        return Err(shape_error(
            "condition_number",
            format!("must be >= 1, got {condition_number}"),
        ));
    }
    let mut rng = SplitMix64::new(seed);
    let curvature = (0..dim)
        .map(|i| condition_number.powf(i as f64 / (dim - 1) as f64))
        .collect();

    let n_heavy = ((dim as f64 * HEAVY_FRACTION).round() as usize).max(1);
    let mut order: Vec<usize> = (0..dim).collect();
    for i in 0..n_heavy {
        let j = i + rng.below(dim - i);
        order.swap(i, j);
    }
    let mut heavy = vec![false; dim];
    for &i in &order[..n_heavy] {
        heavy[i] = true;
    }
    let optimum = heavy
        .iter()
        .map(|&h| {
            let scale = if h { BULK_SCALE * HEAVY_SCALE } else { BULK_SCALE };
            scale * rng.normal()
        })
        .collect();
    Ok(QuadraticProblem {
        curvature,
        optimum,
        heavy,
        noise: 0.0,
        init: vec![0.0; dim],
        seed,
    })
}

impl QuadraticProblem {
    pub fn with_noise(mut self, noise: f64) -> Result<Self> {
        if !(noise.is_finite() && noise >= 0.0) {
            return Err(shape_error("noise", format!("must be >= 0, got {noise}")));
        }
        self.noise = noise;
        Ok(self)
    }

    /// Start from `N(0, scale²)` coordinates instead of the origin.
    pub fn with_init_scale(mut self, scale: f64) -> Result<Self> {
        if !(scale.is_finite() && scale >= 0.0) {
            return Err(shape_error("init_scale", format!("must be >= 0, got {scale}")));
        }
        let mut rng = SplitMix64::new(self.seed ^ 0xA5A5_5A5A_0F0F_F0F0);
        self.init = (0..self.dim()).map(|_| scale * rng.normal()).collect();
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.curvature.len()
    }

    pub fn curvature(&self) -> &[f64] {
        &self.curvature
    }

    pub fn optimum(&self) -> &[f64] {
        &self.optimum
    }

    /// Which coordinates of θ* come from the heavy tail.
    pub fn heavy_mask(&self) -> &[bool] {
        &self.heavy
    }

    fn noise_vector(&self, batch: &Batch) -> Option<Vec<f64>> {
        match *batch {
            Batch::Sample { seed, size } if self.noise > 0.0 => {
                let mut rng = SplitMix64::new(seed);
                let scale = self.noise / (size.max(1) as f64).sqrt();
                Some((0..self.dim()).map(|_| scale * rng.normal()).collect())
            }
            _ => None,
        }
    }
}

impl Problem for QuadraticProblem {
    fn name(&self) -> &str {
        "quadratic"
    }

    fn init_params(&self) -> Vec<ParamTensor> {
        vec![ParamTensor::new("theta", vec![self.dim()], self.init.clone())]
    }

    fn groups(&self) -> Vec<GroupLayout> {
        vec![GroupLayout {
            name: "weights".into(),
            tensors: vec![0],
            decay: true,
        }]
    }

    /// Under a sampled batch the loss gains the linear term `ξᵀθ` whose gradient is the noise.
    fn loss(&self, params: &[ParamTensor], batch: &Batch) -> f64 {
        let theta = &params[0].data;
        let mut loss = 0.0;
        for i in 0..theta.len() {
            let r = theta[i] - self.optimum[i];
            loss += 0.5 * self.curvature[i] * r * r;
        }
        if let Some(xi) = self.noise_vector(batch) {
            loss += xi.iter().zip(theta).map(|(a, b)| a * b).sum::<f64>();
        }
        loss
    }

    fn grad(&self, params: &[ParamTensor], batch: &Batch) -> Vec<Vec<f64>> {
        let theta = &params[0].data;
        let mut g: Vec<f64> = (0..theta.len())
            .map(|i| self.curvature[i] * (theta[i] - self.optimum[i]))
            .collect();
        if let Some(xi) = self.noise_vector(batch) {
            for (gi, x) in g.iter_mut().zip(xi) {
                *gi += x;
            }
        }
        vec![g]
    }
}
