//! Browser demo. Each export returns a JSON string so the page can plot it directly; the
//! plain functions behind the exports are what the native tests exercise.

use huberdecay::config::parse_config;
use huberdecay::harness::{histogram_edges, matched_loss_compare, run, RunOutput};
use huberdecay::oracle::prox_check;
use huberdecay::proximal::prox_huber;
use huberdecay::regularizer::{huber, huber_grad};
use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

const MAX_CURVE_POINTS: usize = 4096;
const MAX_DEMO_STEPS: u64 = 5000;
const MAX_DEMO_DIM: usize = 4096;

fn js(r: Result<Value, String>) -> Result<String, JsValue> {
    r.map(|v| v.to_string()).map_err(|e| JsValue::from_str(&e))
}

/// Huber penalty, its gradient, and the prox map against their quadratic counterparts.
pub fn curves(delta: f64, tau: f64, lo: f64, hi: f64, n: usize) -> Result<Value, String> {
    if lo >= hi || !lo.is_finite() || !hi.is_finite() || !(2..=MAX_CURVE_POINTS).contains(&n) {
        return Err(format!("need lo < hi and 2 <= n <= {MAX_CURVE_POINTS}"));
    }
    let xs: Vec<f64> = (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect();
    let err = |e: huberdecay::Error| e.to_string();
    let mut penalty = Vec::with_capacity(n);
    let mut grad = Vec::with_capacity(n);
    let mut prox = Vec::with_capacity(n);
    for &x in &xs {
        penalty.push(huber(x, delta).map_err(err)?);
        grad.push(huber_grad(x, delta).map_err(err)?);
        prox.push(prox_huber(x, tau, delta).map_err(err)?);
    }
    Ok(json!({
        "x": xs,
        "huber": penalty,
        "huber_grad": grad,
        "l2": xs.iter().map(|x| 0.5 * x * x).collect::<Vec<_>>(),
        "l2_grad": xs,
        "prox_huber": prox,
        "prox_l2": xs.iter().map(|x| x / (1.0 + tau)).collect::<Vec<_>>(),
        "cap": tau * delta,
    }))
}

/// Closed-form prox against the golden-section oracle on seeded triples.
pub fn oracle_check(cases: usize, seed: u64) -> Result<Value, String> {
    if cases > 100_000 {
        return Err("at most 100000 cases".into());
    }
    let report = prox_check(prox_huber, cases, seed, 1e-8).map_err(|e| e.to_string())?;
    serde_json::to_value(report).map_err(|e| e.to_string())
}

fn run_summary(out: &RunOutput, stride: usize) -> Value {
    let last = out.records.last();
    json!({
        "steps": out.trace.iter().step_by(stride).map(|p| p.step).collect::<Vec<_>>(),
        "loss": out.trace.iter().step_by(stride).map(|p| p.loss).collect::<Vec<_>>(),
        "sparsity": out.trace.last().map(|p| p.sparsity.clone()),
        "histogram": last.map(|r| r.groups[0].histogram.clone()),
        "delta": last.and_then(|r| r.groups[0].delta),
        "best_loss": out.best_loss(),
        "aborted": out.abort.as_ref().map(|a| a.reason.clone()),
    })
}

/// AdamW against both AdamHD variants on the heavy-tailed quadratic, compared at the loss
/// all three runs reach.
pub fn compare(
    dim: usize,
    condition_number: f64,
    seed: u64,
    steps: u64,
    lr: f64,
    weight_decay: f64,
    c: f64,
) -> Result<Value, String> {
    if dim == 0 || dim > MAX_DEMO_DIM || steps == 0 || steps > MAX_DEMO_STEPS {
        return Err(format!("need 1 <= dim <= {MAX_DEMO_DIM} and 1 <= steps <= {MAX_DEMO_STEPS}"));
    }
    let base = json!({
        "problem": {"name": "quadratic", "dim": dim, "condition_number": condition_number, "seed": seed},
        "lr": lr,
        "weight_decay": weight_decay,
        "threshold": {"mode": "mean_magnitude", "c": c},
        "total_steps": steps,
        "seed": seed,
        "metric_every": steps,
    })
    .to_string();
    let kinds = ["adamw", "adamhd_euler", "adamhd_prox"];
    let mut outs = Vec::new();
    for kind in kinds {
        let cfg = parse_config(&base, &[format!("optimizer={kind}")]).map_err(|e| e.to_string())?;
        outs.push(run(&cfg).map_err(|e| e.to_string())?);
    }
    let target = outs.iter().map(|o| o.best_loss()).fold(f64::NEG_INFINITY, f64::max) * 1.05;
    let stride = (steps as usize / 500).max(1);
    let runs: Vec<Value> = kinds
        .iter()
        .zip(&outs)
        .map(|(k, o)| {
            let mut v = run_summary(o, stride);
            let hit = matched_loss_compare(&o.trace, &outs[0].trace, target);
            v["name"] = json!(k);
            v["target_step"] = json!(hit.a.step);
            v["target_sparsity"] = json!(hit.a.sparsity);
            v
        })
        .collect();
    Ok(json!({
        "target_loss": target,
        "thresholds": outs[0].pruning_thresholds,
        "histogram_edges": histogram_edges(),
        "runs": runs,
    }))
}

#[wasm_bindgen]
pub fn penalty_curves(delta: f64, tau: f64, lo: f64, hi: f64, n: usize) -> Result<String, JsValue> {
    js(curves(delta, tau, lo, hi, n))
}

#[wasm_bindgen]
pub fn prox_oracle_check(cases: usize, seed: u64) -> Result<String, JsValue> {
    js(oracle_check(cases, seed))
}

#[wasm_bindgen]
pub fn train_compare(
    dim: usize,
    condition_number: f64,
    seed: u64,
    steps: u64,
    lr: f64,
    weight_decay: f64,
    c: f64,
) -> Result<String, JsValue> {
    js(compare(dim, condition_number, seed, steps, lr, weight_decay, c))
}
