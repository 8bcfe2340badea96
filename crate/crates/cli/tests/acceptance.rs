//! Acceptance gate: one PASS/FAIL line per criterion, nonzero exit if any fails.
//!
//! Run with `cargo test -p huberdecay-cli --test acceptance`.

use std::path::Path;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use huberdecay::config::parse_config;
use huberdecay::oracle::{replay_reference, ReplayConfig};
use huberdecay::optim::{
    adam_moments, apply_update, clip_global_norm, DecayRule, HyperParams, MomentState, Optimizer,
    OptimizerConfig, OptimizerKind, ParamGroup, Schedule,
};
use huberdecay::proximal::prox_huber;
use huberdecay::rng::SplitMix64;
use huberdecay::threshold::{update_threshold, ThresholdSpec, ThresholdState};
use huberdecay::ParamTensor;
use huberdecay_cli::{cmd_prox_check, cmd_run, compare_configs, regularizer_grad_check};

type Outcome = Result<String, String>;
type Criterion<'a> = (&'static str, Box<dyn Fn() -> Outcome + 'a>);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn secs(d: Duration) -> String {
    format!("{:.2}s", d.as_secs_f64())
}

// 1 ----------------------------------------------------------------------------------

fn prox_certification() -> Outcome {
    let start = Instant::now();
    let report = cmd_prox_check(10_000, 0, 1e-8).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    let detail = format!(
        "{} cases, max |closed - oracle| = {:.2e} (tol 1e-8), {}",
        report.cases_run,
        report.max_abs_error,
        secs(elapsed)
    );
    ensure(report.cases_run == 10_000, || format!("only {} cases ran", report.cases_run))?;
    ensure(report.passed, || format!("{detail}; worst {:?}", report.worst_case_input))?;
    ensure(elapsed < Duration::from_secs(10), || format!("{detail}: over the 10s budget"))?;
    Ok(detail)
}

// 2 ----------------------------------------------------------------------------------

fn nonexpansive_and_capped() -> Outcome {
    let mut rng = SplitMix64::new(2);
    let (mut worst_lip, mut worst_cap) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
    for i in 0..100_000 {
        let tau = rng.uniform_open_closed(2.0);
        let delta = rng.uniform_open_closed(5.0);
        let y1 = rng.uniform(-10.0, 10.0);
        // Every fourth pair is a close neighbour so the kink region gets dense coverage.
        let y2 = if i % 4 == 0 { y1 + rng.uniform(-1e-3, 1e-3) } else { rng.uniform(-10.0, 10.0) };
        let p1 = prox_huber(y1, tau, delta).map_err(|e| e.to_string())?;
        let p2 = prox_huber(y2, tau, delta).map_err(|e| e.to_string())?;
        let lip = (p1 - p2).abs() - (y1 - y2).abs();
        let cap = (p1 - y1).abs() - (tau / (1.0 + tau) * y1.abs()).min(tau * delta);
        worst_lip = worst_lip.max(lip);
        worst_cap = worst_cap.max(cap);
        ensure(lip <= 1e-12, || format!("pair {i}: y=({y1},{y2}) tau={tau} delta={delta} excess {lip:e}"))?;
        ensure(cap <= 1e-12, || format!("pair {i}: y={y1} tau={tau} delta={delta} cap excess {cap:e}"))?;
    }
    Ok(format!(
        "100000 pairs, max Lipschitz excess {worst_lip:.1e}, max cap excess {worst_cap:.1e} (tol 1e-12)"
    ))
}

// 3 ----------------------------------------------------------------------------------

const CHAIN_STEPS: usize = 200;
const CHAIN_TRAJECTORIES: u64 = 20;

struct Trajectory {
    iterates: Vec<Vec<f64>>,
    adam_updates: Vec<Vec<f64>>,
    lrs: Vec<f64>,
}

fn optimizer_trajectory(kind: OptimizerKind, lambda: f64, spec: ThresholdSpec, seed: u64) -> Trajectory {
    let mut rng = SplitMix64::new(seed);
    let n = 16;
    let mut params = vec![ParamTensor::new("w", vec![n], (0..n).map(|_| 2.0 * rng.normal()).collect())];
    let schedule = Schedule {
        alpha_base: 2e-2,
        warmup_steps: 20,
        total_steps: CHAIN_STEPS as u64,
        alpha_min: 1e-3,
    };
    let config = OptimizerConfig {
        kind,
        hp: HyperParams {
            lr: schedule.alpha_base,
            weight_decay: lambda,
            ..HyperParams::default()
        },
        schedule,
        grad_clip_norm: Some(1.0),
    };
    let group = ParamGroup {
        name: "weights".into(),
        tensors: vec![0],
        lambda_override: None,
        threshold: spec,
    };
    let mut opt = Optimizer::new(config, vec![group], &params).unwrap();
    let mut t = Trajectory {
        iterates: vec![params[0].data.clone()],
        adam_updates: Vec::new(),
        lrs: Vec::new(),
    };
    for _ in 0..CHAIN_STEPS {
        let g: Vec<f64> = (0..n).map(|_| rng.normal() * 3.0).collect();
        let report = opt.step(&mut params, vec![g]).unwrap();
        t.adam_updates.push(report.outcomes[0].adam_update.clone());
        t.lrs.push(report.lr);
        t.iterates.push(params[0].data.clone());
    }
    t
}

fn bits(t: &Trajectory) -> Vec<Vec<u64>> {
    t.iterates.iter().map(|x| x.iter().map(|v| v.to_bits()).collect()).collect()
}

fn equivalence_chain() -> Outcome {
    let mean = ThresholdSpec::mean_magnitude(1.0);
    let mut prox_worst = 0.0f64;
    for seed in 0..CHAIN_TRAJECTORIES {
        let adam = bits(&optimizer_trajectory(OptimizerKind::Adam, 0.0, mean.clone(), seed));
        for kind in [OptimizerKind::AdamW, OptimizerKind::AdamHdEuler, OptimizerKind::AdamHdProx] {
            let other = bits(&optimizer_trajectory(kind, 0.0, mean.clone(), seed));
            ensure(other == adam, || format!("seed {seed}: {kind} with lambda=0 differs from adam"))?;
        }
        let lambda = 0.5;
        let w = bits(&optimizer_trajectory(OptimizerKind::AdamW, lambda, mean.clone(), seed));
        let e = bits(&optimizer_trajectory(OptimizerKind::AdamHdEuler, lambda, ThresholdSpec::unbounded(), seed));
        ensure(w == e, || format!("seed {seed}: unbounded adamhd_euler differs from adamw"))?;
        let p = optimizer_trajectory(OptimizerKind::AdamHdProx, lambda, ThresholdSpec::unbounded(), seed);
        for s in 0..CHAIN_STEPS {
            let tau = p.lrs[s] * lambda;
            for i in 0..p.iterates[s].len() {
                let tilde = p.iterates[s][i] - p.adam_updates[s][i];
                let err = (p.iterates[s + 1][i] - tilde / (1.0 + tau)).abs();
                prox_worst = prox_worst.max(err);
            }
        }
        ensure(prox_worst <= 1e-12, || format!("seed {seed}: unbounded prox off proximal-L2 by {prox_worst:e}"))?;
    }
    Ok(format!(
        "{CHAIN_TRAJECTORIES} trajectories x {CHAIN_STEPS} steps: lambda=0 bitwise to adam, \
         unbounded euler bitwise to adamw, unbounded prox within {prox_worst:.1e} of theta~/(1+tau)"
    ))
}

// 4 ----------------------------------------------------------------------------------

fn gradient_is_clip() -> Outcome {
    let report = regularizer_grad_check(10_000, 4, 1e-6).map_err(|e| e.to_string())?;
    let detail = format!(
        "{} points evaluated (kink band 1e-4 excluded), max |fd - clip| = {:.2e} (tol 1e-6)",
        report.cases_run, report.max_abs_error
    );
    ensure(report.passed, || format!("{detail}; worst {:?}", report.worst_case_input))?;
    ensure(report.cases_run >= 9_000, || format!("{detail}: too many points excluded"))?;
    Ok(detail)
}

// 5 ----------------------------------------------------------------------------------

const REPLAY_STEPS: usize = 100;

fn differential_trajectories() -> Outcome {
    let mut worst = 0.0f64;
    let mut cells = 0;
    for kind in OptimizerKind::ALL {
        let (b1, b2) = kind.default_betas();
        let settings = [
            (
                HyperParams { lr: 1e-2, beta1: b1, beta2: b2, weight_decay: 0.1, ..HyperParams::default() },
                Schedule::constant(1e-2, REPLAY_STEPS as u64),
                None,
                ThresholdSpec::mean_magnitude(1.0),
            ),
            (
                HyperParams { lr: 3e-2, beta1: 0.8, beta2: 0.95, eps: 1e-6, weight_decay: 0.7, bias_correction: false },
                Schedule { alpha_base: 3e-2, warmup_steps: 10, total_steps: REPLAY_STEPS as u64, alpha_min: 1e-3 },
                Some(1.0),
                ThresholdSpec::ema(0.5, 0.9),
            ),
        ];
        for (si, (hp, schedule, clip, spec)) in settings.into_iter().enumerate() {
            let mut rng = SplitMix64::new(50 + si as u64);
            let mut params = vec![
                ParamTensor::new("w", vec![5, 4], (0..20).map(|_| rng.normal()).collect()),
                ParamTensor::new("b", vec![4], (0..4).map(|_| 0.1 * rng.normal()).collect()),
            ];
            let init: Vec<Vec<f64>> = params.iter().map(|p| p.data.clone()).collect();
            let grads: Vec<Vec<Vec<f64>>> = (0..REPLAY_STEPS)
                .map(|_| params.iter().map(|p| (0..p.len()).map(|_| 2.0 * rng.normal()).collect()).collect())
                .collect();
            let groups = vec![
                ParamGroup { name: "weights".into(), tensors: vec![0], lambda_override: None, threshold: spec.clone() },
                ParamGroup { name: "biases".into(), tensors: vec![1], lambda_override: Some(0.0), threshold: spec.clone() },
            ];
            let reference = replay_reference(
                &ReplayConfig {
                    kind,
                    hp: hp.clone(),
                    lambdas: vec![hp.weight_decay, 0.0],
                    thresholds: vec![spec.clone(); 2],
                    lrs: (0..REPLAY_STEPS as u64).map(|t| schedule.lr_at(t).unwrap()).collect(),
                    grad_clip_norm: clip,
                },
                &init,
                &grads,
            );
            let config = OptimizerConfig { kind, hp, schedule, grad_clip_norm: clip };
            let mut opt = Optimizer::new(config, groups, &params).map_err(|e| e.to_string())?;
            for (t, g) in grads.iter().enumerate() {
                opt.step(&mut params, g.clone()).map_err(|e| e.to_string())?;
                for (k, p) in params.iter().enumerate() {
                    for (a, b) in p.data.iter().zip(&reference[t + 1][k]) {
                        worst = worst.max((a - b).abs());
                    }
                }
            }
            ensure(worst <= 1e-12, || format!("{kind} setting {si}: deviation {worst:e}"))?;
            cells += 1;
        }
    }
    Ok(format!("{cells} optimizer/setting cells x {REPLAY_STEPS} steps, max deviation {worst:.1e} (tol 1e-12)"))
}

// 6 ----------------------------------------------------------------------------------

/// At every step of a trajectory the update is evaluated twice from the same state, once
/// with `v̂` and once with `4·v̂` (`v_t` scaled by 4; bias correction is linear).
fn second_moment_decoupling() -> Outcome {
    let steps = 200;
    let n = 64;
    let hp = HyperParams { lr: 1e-2, weight_decay: 0.5, ..HyperParams::default() };
    let spec = ThresholdSpec::mean_magnitude(1.0);
    let mut shift_coords = 0usize;
    let mut interior_coords = 0usize;
    for kind in [OptimizerKind::AdamW, OptimizerKind::AdamHdEuler, OptimizerKind::AdamHdProx] {
        let mut rng = SplitMix64::new(6);
        let mut theta: Vec<f64> = (0..n).map(|i| if i % 8 == 0 { 5.0 } else { 0.3 } * rng.normal()).collect();
        let mut moments = MomentState::zeros(n);
        let mut tstate = ThresholdState::default();
        let mut adam_changed = 0usize;
        for s in 0..steps {
            let delta = update_threshold(&spec, &mut tstate, &theta).map_err(|e| e.to_string())?;
            let g: Vec<f64> = (0..n).map(|_| rng.normal()).collect();
            let (m_hat, v_hat) = adam_moments(&mut moments, &g, &hp).map_err(|e| e.to_string())?;
            let v4: Vec<f64> = v_hat.iter().map(|v| 4.0 * v).collect();
            let lambda = hp.weight_decay;
            let rule = match kind {
                OptimizerKind::AdamW => DecayRule::L2 { lambda },
                OptimizerKind::AdamHdEuler => DecayRule::HuberEuler { lambda, delta },
                _ => DecayRule::HuberProx { lambda, delta },
            };
            let (mut a, mut b) = (theta.clone(), theta.clone());
            let oa = apply_update(&mut a, &m_hat, &v_hat, hp.eps, hp.lr, rule);
            let ob = apply_update(&mut b, &m_hat, &v4, hp.eps, hp.lr, rule);
            adam_changed += oa.adam_update.iter().zip(&ob.adam_update).filter(|(x, y)| x != y).count();
            let tau = hp.lr * lambda;
            for i in 0..n {
                let (da, db) = (oa.decay[i].to_bits(), ob.decay[i].to_bits());
                if kind != OptimizerKind::AdamHdProx {
                    ensure(da == db, || format!("{kind} step {s} coord {i}: decay {} vs {}", oa.decay[i], ob.decay[i]))?;
                    continue;
                }
                let ta = theta[i] - oa.adam_update[i];
                let tb = theta[i] - ob.adam_update[i];
                let cap = (1.0 + tau) * delta.as_f64();
                if ta.abs() > cap && tb.abs() > cap && ta.signum() == tb.signum() {
                    shift_coords += 1;
                    ensure(da == db, || format!("prox step {s} coord {i}: capped decay moved"))?;
                } else {
                    interior_coords += 1;
                    let expected = tb - prox_huber(tb, tau, delta.as_f64()).map_err(|e| e.to_string())?;
                    ensure(db == expected.to_bits(), || format!("prox step {s} coord {i}: decay carries a v-dependent factor"))?;
                }
            }
            theta = a;
        }
        ensure(adam_changed > 0, || format!("{kind}: rescaling v never changed the adaptive step"))?;
    }
    ensure(shift_coords > 1000, || format!("only {shift_coords} capped prox coordinates exercised"))?;
    Ok(format!(
        "200 steps x 64 coords: adamw/euler decay bitwise unchanged; prox capped decay bitwise unchanged \
         on {shift_coords} coords, interior decay equals the v-free map of its input on {interior_coords}"
    ))
}

// 7 ----------------------------------------------------------------------------------

fn sparsity_direction(out: &Path) -> Outcome {
    let start = Instant::now();
    let base = r#"{"problem": {"name": "quadratic", "dim": 512, "condition_number": 1000}}"#;
    let mut passing = 0;
    let mut lines = Vec::new();
    for seed in 0..5u64 {
        let cfg = |opt: &str| {
            parse_config(base, &[format!("optimizer={opt}"), format!("problem.seed={seed}"), format!("seed={seed}")])
                .map_err(|e| e.to_string())
        };
        let mut seed_ok = false;
        let mut parts = Vec::new();
        for variant in ["adamhd_euler", "adamhd_prox"] {
            let report = compare_configs(cfg(variant)?, cfg("adamw")?, None, out).map_err(|e| e.to_string())?;
            let ok = report.a_at_least_as_sparse().unwrap_or(false);
            seed_ok |= ok;
            let delta = report
                .sparsity_delta
                .as_ref()
                .map(|d| d.iter().map(|x| format!("{x:+.3}")).collect::<Vec<_>>().join(","))
                .unwrap_or_else(|| "unreached".into());
            parts.push(format!(
                "{variant} steps {:?}/{:?} d[{delta}]",
                report.comparison.a.step, report.comparison.b.step
            ));
        }
        if seed_ok {
            passing += 1;
        }
        lines.push(format!("seed {seed} {}: {}", if seed_ok { "ok" } else { "no" }, parts.join("; ")));
    }
    let elapsed = start.elapsed();
    for l in &lines {
        println!("        {l}");
    }
    let detail = format!("{passing}/5 seeds with HD sparsity >= AdamW at every threshold, {}", secs(elapsed));
    ensure(passing >= 4, || detail.clone())?;
    ensure(elapsed < Duration::from_secs(120), || format!("{detail}: over the 2 minute budget"))?;
    Ok(detail)
}

// 8 ----------------------------------------------------------------------------------

fn csv_determinism(tmp: &Path) -> Outcome {
    let cfg = tmp.join("determinism.json");
    std::fs::write(
        &cfg,
        r#"{"problem": {"name": "mlp", "layers": [4, 16, 1], "n_samples": 128, "seed": 3},
            "optimizer": "adamhd_prox", "batch_size": 16, "total_steps": 300, "seed": 11}"#,
    )
    .map_err(|e| e.to_string())?;
    let a = cmd_run(&cfg, &[], None, &tmp.join("det-a")).map_err(|e| e.to_string())?;
    let b = cmd_run(&cfg, &[], None, &tmp.join("det-b")).map_err(|e| e.to_string())?;
    let ca = std::fs::read(a.dir.join("metrics.csv")).map_err(|e| e.to_string())?;
    let cb = std::fs::read(b.dir.join("metrics.csv")).map_err(|e| e.to_string())?;
    ensure(a.run_id == b.run_id, || "run ids differ".into())?;
    ensure(ca == cb, || "metrics.csv differs between identical runs".into())?;
    Ok(format!("two runs of {} produce identical {}-byte metrics.csv", a.run_id, ca.len()))
}

// 9 ----------------------------------------------------------------------------------

fn schedule_and_clip() -> Outcome {
    let cases = [
        (6e-4, 700, 10_000, 6e-5),
        (1e-3, 700, 701, 0.0),
        (0.1, 3, 17, 1e-7),
        (2.5e-2, 0, 50, 1e-4),
    ];
    for (alpha, warmup, total, min) in cases {
        let s = Schedule { alpha_base: alpha, warmup_steps: warmup, total_steps: total, alpha_min: min };
        let at_warmup = s.lr_at(warmup).map_err(|e| e.to_string())?;
        let at_total = s.lr_at(total).map_err(|e| e.to_string())?;
        ensure(at_warmup.to_bits() == alpha.to_bits(), || format!("{s:?}: lr_at(warmup) = {at_warmup}"))?;
        ensure(at_total.to_bits() == min.to_bits(), || format!("{s:?}: lr_at(total) = {at_total}"))?;
    }
    let mut g = vec![vec![3.0, 4.0]];
    let norm = clip_global_norm(&mut g, 1.0).map_err(|e| e.to_string())?;
    ensure(norm == 5.0 && g[0] == [0.6, 0.8], || format!("clip gave norm {norm}, {:?}", g[0]))?;
    let mut split = vec![vec![3.0], vec![4.0]];
    clip_global_norm(&mut split, 1.0).map_err(|e| e.to_string())?;
    ensure(split == [vec![0.6], vec![0.8]], || format!("split clip gave {split:?}"))?;
    Ok(format!("{} schedules hit both endpoints exactly; [3,4] clips to [0.6,0.8] with norm 5", cases.len()))
}

fn main() -> ExitCode {
    let tmp = tempfile::tempdir().expect("temp dir");
    let criteria: Vec<Criterion> = vec![
        ("prox closed form matches golden-section oracle", Box::new(prox_certification)),
        ("prox is nonexpansive and displacement is capped", Box::new(nonexpansive_and_capped)),
        ("equivalence chain", Box::new(equivalence_chain)),
        ("regularizer gradient is the clip", Box::new(gradient_is_clip)),
        ("optimizers agree with replay reference", Box::new(differential_trajectories)),
        ("decay is decoupled from second moment", Box::new(second_moment_decoupling)),
        ("sparsity at matched loss, heavy-tailed quadratic", Box::new(|| sparsity_direction(&tmp.path().join("compare")))),
        ("cmd_run metrics CSV is deterministic", Box::new(|| csv_determinism(tmp.path()))),
        ("schedule endpoints and global-norm clip", Box::new(schedule_and_clip)),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        match check() {
            Ok(detail) => println!("PASS  {}  {name}: {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL  {}  {name}: {why}", i + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
