//! Experiment runner.
//!
//! A run evaluates the full-batch loss and pruning sparsity of `θ_t` at every step
//! `t = 0..=total_steps`, emits a [`MetricsRecord`] every `metric_every` steps (and at the
//! last one), and applies `total_steps` optimizer updates in between.

mod artifacts;
mod compare;
mod metrics;

use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::models::{Batch, Problem};
use crate::optim::{global_norm, Optimizer, ParamGroup};
use crate::regularizer::HuberThreshold;
use crate::rng::SplitMix64;
use crate::tensor::ParamTensor;

pub use artifacts::{
    atomic_write, line_chart_svg, metrics_csv, steps_to_target, summary_json, write_run_artifacts,
    ChartSeries,
};
pub use compare::{matched_loss_compare, Comparison, TargetHit};
pub use metrics::{histogram, histogram_edges, prune_sparsity, HIST_BINS, HIST_MAX, HIST_MIN};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroupMetrics {
    pub group: String,
    pub mean_abs: f64,
    pub max_abs: f64,
    /// Length-weighted mean of the group's per-tensor δ; `None` without a threshold.
    pub delta: Option<f64>,
    /// Fraction of the group's weights below each pruning threshold.
    pub sparsity: Vec<f64>,
    pub histogram: Vec<u64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    pub step: u64,
    /// Learning rate of the update leaving this step.
    pub lr: f64,
    pub loss: f64,
    /// Pre-clip norm of the stochastic gradient at this step.
    pub grad_norm: f64,
    pub groups: Vec<GroupMetrics>,
}

/// Per-step loss and pruning sparsity over decayed groups.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TracePoint {
    pub step: u64,
    pub loss: f64,
    pub sparsity: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Abort {
    pub step: u64,
    pub reason: String,
}

#[derive(Clone, Debug)]
pub struct RunOutput {
    pub records: Vec<MetricsRecord>,
    pub trace: Vec<TracePoint>,
    pub final_params: Vec<ParamTensor>,
    pub groups: Vec<ParamGroup>,
    pub pruning_thresholds: Vec<f64>,
    pub abort: Option<Abort>,
}

impl RunOutput {
    pub fn final_loss(&self) -> f64 {
        self.trace.last().map_or(f64::NAN, |p| p.loss)
    }

    pub fn best_loss(&self) -> f64 {
        self.trace.iter().map(|p| p.loss).fold(f64::INFINITY, f64::min)
    }
}

/// Resolve the problem's tensor groups against the config's per-group overrides.
pub fn build_groups(config: &RunConfig, problem: &dyn Problem) -> Result<Vec<ParamGroup>> {
    let layout = problem.groups();
    for name in config.groups.keys() {
        if !layout.iter().any(|g| &g.name == name) {
            return Err(Error::config(
                format!("groups.{name}"),
                format!("problem `{}` has no such group", problem.name()),
            ));
        }
    }
    Ok(layout
        .into_iter()
        .map(|g| {
            let ov = config.groups.get(&g.name);
            let lambda_override = ov
                .and_then(|o| o.weight_decay)
                .or(if g.decay { None } else { Some(0.0) });
            let threshold = ov
                .and_then(|o| o.threshold.clone())
                .unwrap_or_else(|| config.threshold.clone());
            ParamGroup {
                name: g.name,
                tensors: g.tensors,
                lambda_override,
                threshold,
            }
        })
        .collect())
}

/// Groups that count towards pruning sparsity: everything not explicitly masked out of decay.
pub fn decayed_groups(groups: &[ParamGroup]) -> Vec<usize> {
    (0..groups.len())
        .filter(|&i| groups[i].lambda_override != Some(0.0))
        .collect()
}

fn decayed_slices<'a>(groups: &[ParamGroup], decayed: &[usize], params: &'a [ParamTensor]) -> Vec<&'a [f64]> {
    decayed
        .iter()
        .flat_map(|&g| groups[g].tensors.iter().map(|&t| params[t].data.as_slice()))
        .collect()
}

fn group_metrics(
    group: &ParamGroup,
    params: &[ParamTensor],
    deltas: &[Option<HuberThreshold>],
    thresholds: &[f64],
) -> GroupMetrics {
    let slices: Vec<&[f64]> = group.tensors.iter().map(|&t| params[t].data.as_slice()).collect();
    let count: usize = slices.iter().map(|s| s.len()).sum();
    let values = || slices.iter().flat_map(|s| s.iter().map(|x| x.abs()));
    let mean_abs = values().sum::<f64>() / count.max(1) as f64;
    let max_abs = values().fold(0.0, f64::max);
    let delta = if group.tensors.iter().all(|&t| deltas[t].is_some()) && !group.tensors.is_empty() {
        let weighted: f64 = group
            .tensors
            .iter()
            .map(|&t| deltas[t].unwrap().as_f64() * params[t].len() as f64)
            .sum();
        Some(weighted / count.max(1) as f64)
    } else {
        None
    };
    GroupMetrics {
        group: group.name.clone(),
        mean_abs,
        max_abs,
        delta,
        sparsity: thresholds.iter().map(|&th| prune_sparsity(&slices, th)).collect(),
        histogram: histogram(values()),
    }
}

pub fn run(config: &RunConfig) -> Result<RunOutput> {
    config.validate()?;
    let problem = config.problem.build()?;
    run_problem(config, problem.as_ref())
}

/// Run `config` against an already-built problem (`config.problem` is ignored).
pub fn run_problem(config: &RunConfig, problem: &dyn Problem) -> Result<RunOutput> {
    config.validate()?;
    let mut params = problem.init_params();
    let groups = build_groups(config, problem)?;
    let decayed = decayed_groups(&groups);
    let thresholds = config.pruning_thresholds.clone();
    let mut opt = Optimizer::new(config.optimizer_config(), groups.clone(), &params)?;
    let mut batch_rng = SplitMix64::new(config.seed);
    let total = config.total_steps;

    let mut records = Vec::new();
    let mut trace = Vec::with_capacity(total as usize + 1);
    let mut abort = None;

    for t in 0..=total {
        let loss = problem.loss(&params, &Batch::Full);
        let slices = decayed_slices(&groups, &decayed, &params);
        trace.push(TracePoint {
            step: t,
            loss,
            sparsity: thresholds.iter().map(|&th| prune_sparsity(&slices, th)).collect(),
        });

        let batch = match config.batch_size {
            None => Batch::Full,
            Some(size) => Batch::Sample {
                seed: batch_rng.next_u64(),
                size,
            },
        };
        let grads = problem.grad(&params, &batch);
        let grad_norm = global_norm(&grads);

        if !loss.is_finite() {
            abort = Some(Abort {
                step: t,
                reason: format!("non-finite loss {loss}"),
            });
        }
        if abort.is_some() || t % config.metric_every == 0 || t == total {
            let deltas = opt
                .peek_deltas(&params)
                .unwrap_or_else(|_| vec![None; params.len()]);
            let lr = opt.next_lr().unwrap_or(f64::NAN);
            records.push(MetricsRecord {
                step: t,
                lr,
                loss,
                grad_norm,
                groups: groups
                    .iter()
                    .map(|g| group_metrics(g, &params, &deltas, &thresholds))
                    .collect(),
            });
        }
        if abort.is_some() || t == total {
            break;
        }
        if let Err(e) = opt.step(&mut params, grads) {
            abort = Some(Abort {
                step: t,
                reason: e.to_string(),
            });
            break;
        }
    }

    Ok(RunOutput {
        records,
        trace,
        final_params: params,
        groups,
        pruning_thresholds: thresholds,
        abort,
    })
}
