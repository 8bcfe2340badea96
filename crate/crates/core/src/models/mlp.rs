use super::{batch_indices, shape_error, Batch, GroupLayout, Problem};
use crate::error::Result;
use crate::rng::SplitMix64;
use crate::tensor::ParamTensor;

/// tanh network regressing a seeded teacher of the same shape under `½·mean‖f(x) − y‖²`.
///
/// Parameters alternate `w{l}` (`[out, in]`, row-major) and `b{l}` (`[out]`); hidden layers use
/// tanh, the output layer is linear.
#[derive(Clone, Debug)]
pub struct MlpProblem {
    widths: Vec<usize>,
    inputs: Vec<f64>,
    targets: Vec<f64>,
    seed: u64,
}

fn init_layers(widths: &[usize], rng: &mut SplitMix64, weight_gain: f64, bias_scale: f64) -> Vec<ParamTensor> {
    let mut out = Vec::new();
    for (l, pair) in widths.windows(2).enumerate() {
        let (fan_in, fan_out) = (pair[0], pair[1]);
        let std = weight_gain / (fan_in as f64).sqrt();
        let w = (0..fan_in * fan_out).map(|_| std * rng.normal()).collect();
        let b = (0..fan_out).map(|_| bias_scale * rng.normal()).collect();
        out.push(ParamTensor::new(format!("w{}", l + 1), vec![fan_out, fan_in], w));
        out.push(ParamTensor::new(format!("b{}", l + 1), vec![fan_out], b));
    }
    out
}

fn check_widths(widths: &[usize]) -> Result<()> {
    if widths.len() < 3 {
        return Err(shape_error(
            "layers",
            format!("need input, >= 1 hidden and output widths, got {widths:?}"),
        ));
    }
    if widths.contains(&0) {
        return Err(shape_error("layers", format!("widths must be >= 1, got {widths:?}")));
    }
    Ok(())
}

pub fn mlp_problem(widths: &[usize], n_samples: usize, seed: u64) -> Result<MlpProblem> {
    check_widths(widths)?;
    if n_samples == 0 {
        return Err(shape_error("n_samples", "must be >= 1"));
    }
    let mut rng = SplitMix64::new(seed);
    let teacher = init_layers(widths, &mut rng, 1.5, 0.1);
    let d_in = widths[0];
    let inputs: Vec<f64> = (0..n_samples * d_in).map(|_| rng.normal()).collect();
    let targets = inputs
        .chunks(d_in)
        .flat_map(|x| forward(widths, &teacher, x).pop().unwrap())
        .collect();
    MlpProblem::from_data(widths, inputs, targets, seed)
}

/// Activations of every layer, input first.
fn forward(widths: &[usize], params: &[ParamTensor], x: &[f64]) -> Vec<Vec<f64>> {
    let layers = widths.len() - 1;
    let mut acts = vec![x.to_vec()];
    for l in 0..layers {
        let (w, b) = (&params[2 * l].data, &params[2 * l + 1].data);
        let (fan_in, fan_out) = (widths[l], widths[l + 1]);
        let prev = &acts[l];
        let mut z: Vec<f64> = (0..fan_out)
            .map(|o| b[o] + (0..fan_in).map(|i| w[o * fan_in + i] * prev[i]).sum::<f64>())
            .collect();
        if l + 1 < layers {
            z.iter_mut().for_each(|v| *v = v.tanh());
        }
        acts.push(z);
    }
    acts
}

impl MlpProblem {
    pub fn from_data(widths: &[usize], inputs: Vec<f64>, targets: Vec<f64>, seed: u64) -> Result<Self> {
        check_widths(widths)?;
        let (d_in, d_out) = (widths[0], *widths.last().unwrap());
        let n = inputs.len() / d_in;
        if n == 0 || inputs.len() != n * d_in || targets.len() != n * d_out {
            return Err(shape_error("n_samples", "inputs and targets disagree on sample count"));
        }
        Ok(Self {
            widths: widths.to_vec(),
            inputs,
            targets,
            seed,
        })
    }

    pub fn widths(&self) -> &[usize] {
        &self.widths
    }

    pub fn n_samples(&self) -> usize {
        self.inputs.len() / self.widths[0]
    }

    pub fn targets(&self) -> &[f64] {
        &self.targets
    }

    fn sample(&self, i: usize) -> (&[f64], &[f64]) {
        let (d_in, d_out) = (self.widths[0], *self.widths.last().unwrap());
        (
            &self.inputs[i * d_in..(i + 1) * d_in],
            &self.targets[i * d_out..(i + 1) * d_out],
        )
    }
}

impl Problem for MlpProblem {
    fn name(&self) -> &str {
        "mlp"
    }

    fn init_params(&self) -> Vec<ParamTensor> {
        let mut rng = SplitMix64::new(self.seed.wrapping_add(0x5EED));
        let mut params = init_layers(&self.widths, &mut rng, 0.5, 0.0);
        for p in params.iter_mut().skip(1).step_by(2) {
            p.data.iter_mut().for_each(|b| *b = 0.0);
        }
        params
    }

    fn groups(&self) -> Vec<GroupLayout> {
        let n = 2 * (self.widths.len() - 1);
        vec![
            GroupLayout {
                name: "weights".into(),
                tensors: (0..n).step_by(2).collect(),
                decay: true,
            },
            GroupLayout {
                name: "biases".into(),
                tensors: (1..n).step_by(2).collect(),
                decay: false,
            },
        ]
    }

    fn loss(&self, params: &[ParamTensor], batch: &Batch) -> f64 {
        let idx = batch_indices(batch, self.n_samples());
        let total: f64 = idx
            .iter()
            .map(|&i| {
                let (x, y) = self.sample(i);
                let out = forward(&self.widths, params, x).pop().unwrap();
                out.iter().zip(y).map(|(o, t)| (o - t) * (o - t)).sum::<f64>()
            })
            .sum();
        0.5 * total / idx.len() as f64
    }

    fn grad(&self, params: &[ParamTensor], batch: &Batch) -> Vec<Vec<f64>> {
        let idx = batch_indices(batch, self.n_samples());
        let layers = self.widths.len() - 1;
        let mut grads: Vec<Vec<f64>> = params.iter().map(|p| vec![0.0; p.len()]).collect();
        for &i in &idx {
            let (x, y) = self.sample(i);
            let acts = forward(&self.widths, params, x);
            // dL/dz of the output layer.
            let mut delta: Vec<f64> = acts[layers].iter().zip(y).map(|(o, t)| o - t).collect();
            for l in (0..layers).rev() {
                let (fan_in, fan_out) = (self.widths[l], self.widths[l + 1]);
                let prev = &acts[l];
                for o in 0..fan_out {
                    grads[2 * l + 1][o] += delta[o];
                    for k in 0..fan_in {
                        grads[2 * l][o * fan_in + k] += delta[o] * prev[k];
                    }
                }
                if l > 0 {
                    let w = &params[2 * l].data;
                    delta = (0..fan_in)
                        .map(|k| {
                            let back: f64 = (0..fan_out).map(|o| w[o * fan_in + k] * delta[o]).sum();
                            // acts[l] = tanh(z), so tanh'(z) = 1 − acts².
                            back * (1.0 - prev[k] * prev[k])
                        })
                        .collect();
                }
            }
        }
        let n = idx.len() as f64;
        for g in grads.iter_mut() {
            g.iter_mut().for_each(|v| *v /= n);
        }
        grads
    }
}
