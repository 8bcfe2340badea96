//! Command implementations behind the `huberdecay` binary.
//!
//! Each `cmd_*` function does the work and returns a typed report; `main.rs` only parses
//! flags, prints, and maps outcomes to exit codes.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use huberdecay::config::{config_from_value, load_config, set_path, RunConfig};
use huberdecay::harness::{self, atomic_write, matched_loss_compare, Comparison, RunOutput};
use huberdecay::models::Batch;
use huberdecay::oracle::{self, ErrorScale, OracleReport, WorstCase};
use huberdecay::proximal::prox_huber;
use huberdecay::regularizer::{regularizer_grad, regularizer_value, Deltas};
use huberdecay::rng::SplitMix64;
use huberdecay::Error;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

pub const EXIT_OK: u8 = 0;
pub const EXIT_ABORTED: u8 = 1;
pub const EXIT_CONFIG: u8 = 2;
pub const EXIT_CHECK: u8 = 3;

/// Environment variable naming the default output root.
pub const OUT_ENV: &str = "HUBERDECAY_OUT";
const DEFAULT_OUT: &str = "runs";

/// Slack on the worse run's best loss when `compare` picks the matched-loss target itself.
pub const MATCHED_LOSS_SLACK: f64 = 1.05;

pub type Result<T> = std::result::Result<T, Error>;

/// `--out`, else `$HUBERDECAY_OUT`, else `./runs`.
pub fn output_root(flag: Option<&Path>) -> PathBuf {
    match flag {
        Some(p) => p.to_path_buf(),
        None => std::env::var_os(OUT_ENV)
            .filter(|v| !v.is_empty())
            .map(PathBuf::from)
            .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT)),
    }
}

/// First 12 hex digits of the SHA-256 of the canonical config JSON, plus the seed.
pub fn run_id(config: &RunConfig) -> String {
    let canonical = serde_json::to_vec(config).expect("config serializes");
    let digest = Sha256::digest(&canonical);
    format!("{}-s{}", &hex::encode(digest)[..12], config.seed)
}

fn with_seed(mut overrides: Vec<String>, seed: Option<u64>) -> Vec<String> {
    if let Some(s) = seed {
        overrides.push(format!("seed={s}"));
    }
    overrides
}

pub struct RunArtifacts {
    pub run_id: String,
    pub dir: PathBuf,
    pub config: RunConfig,
    pub output: RunOutput,
}

impl RunArtifacts {
    pub fn aborted(&self) -> bool {
        self.output.abort.is_some()
    }
}

/// Execute an already-parsed config and write its artifacts under `out/<run_id>/`.
pub fn execute(config: RunConfig, out: &Path) -> Result<RunArtifacts> {
    let id = run_id(&config);
    let output = harness::run(&config)?;
    let dir = out.join(&id);
    harness::write_run_artifacts(&dir, &id, &config, &output)?;
    Ok(RunArtifacts {
        run_id: id,
        dir,
        config,
        output,
    })
}

pub fn cmd_run(config_path: &Path, overrides: &[String], seed: Option<u64>, out: &Path) -> Result<RunArtifacts> {
    let config = load_config(config_path, &with_seed(overrides.to_vec(), seed))?;
    execute(config, out)
}

/// Sweep file: a base config and a grid of dotted keys to value lists.
#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    #[serde(default)]
    pub base: Value,
    pub grid: BTreeMap<String, Vec<Value>>,
}

#[derive(Clone, Debug, Serialize)]
pub struct SweepCell {
    pub run_id: String,
    pub settings: BTreeMap<String, Value>,
    pub status: String,
    pub final_loss: Option<f64>,
    pub best_loss: Option<f64>,
}

/// Cartesian product of the grid, in key order with the last key varying fastest.
pub fn sweep_cells(grid: &BTreeMap<String, Vec<Value>>) -> Vec<BTreeMap<String, Value>> {
    let mut cells = vec![BTreeMap::new()];
    for (key, values) in grid {
        cells = cells
            .into_iter()
            .flat_map(|cell| {
                values.iter().map(move |v| {
                    let mut c = cell.clone();
                    c.insert(key.clone(), v.clone());
                    c
                })
            })
            .collect();
    }
    cells
}

fn finite(x: f64) -> Option<f64> {
    x.is_finite().then_some(x)
}

/// Run every grid cell on a pool of `jobs` workers. Each cell writes into its own run
/// directory; an index of cells goes to `out/sweep-<hash>.json`.
pub fn cmd_sweep(
    sweep_path: &Path,
    overrides: &[String],
    seed: Option<u64>,
    out: &Path,
    jobs: usize,
) -> Result<(PathBuf, Vec<SweepCell>)> {
    use rayon::prelude::*;

    let text = std::fs::read_to_string(sweep_path)?;
    let spec: SweepSpec = serde_json::from_str(&text).map_err(|e| Error::config("<sweep>", e.to_string()))?;
    if spec.grid.values().any(Vec::is_empty) {
        return Err(Error::config("grid", "every grid key needs at least one value"));
    }
    let base = if spec.base.is_null() {
        Value::Object(Default::default())
    } else {
        spec.base
    };
    let overrides = with_seed(overrides.to_vec(), seed);
    // Resolve every cell before running any, so a bad key fails fast.
    let configs: Vec<(BTreeMap<String, Value>, RunConfig)> = sweep_cells(&spec.grid)
        .into_iter()
        .map(|settings| {
            let mut value = base.clone();
            for (k, v) in &settings {
                let path: Vec<String> = k.split('.').map(str::to_owned).collect();
                set_path(&mut value, &path, v.clone())?;
            }
            Ok((settings, config_from_value(value, &overrides)?))
        })
        .collect::<Result<_>>()?;

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::config("jobs", e.to_string()))?;
    let cells: Vec<SweepCell> = pool.install(|| {
        configs
            .into_par_iter()
            .map(|(settings, config)| {
                let art = execute(config, out)?;
                Ok(SweepCell {
                    run_id: art.run_id.clone(),
                    settings,
                    status: if art.aborted() { "aborted" } else { "completed" }.into(),
                    final_loss: finite(art.output.final_loss()),
                    best_loss: finite(art.output.best_loss()),
                })
            })
            .collect::<Result<_>>()
    })?;

    let digest = Sha256::digest(text.as_bytes());
    let index = out.join(format!("sweep-{}.json", &hex::encode(digest)[..12]));
    let body = serde_json::to_string_pretty(&cells).expect("cells serialize");
    atomic_write(&index, body.as_bytes())?;
    Ok((index, cells))
}

#[derive(Clone, Debug, Serialize)]
pub struct CompareSide {
    pub run_id: String,
    pub optimizer: String,
    pub aborted: bool,
    pub best_loss: Option<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct CompareReport {
    pub a: CompareSide,
    pub b: CompareSide,
    /// `"explicit"` for `--target-loss`, `"matched_best"` when derived from both runs.
    pub target_source: String,
    pub pruning_thresholds: Vec<f64>,
    pub comparison: Comparison,
    pub sparsity_delta: Option<Vec<f64>>,
}

impl CompareReport {
    /// Run A's sparsity at its target step is at least run B's at every threshold.
    pub fn a_at_least_as_sparse(&self) -> Option<bool> {
        self.sparsity_delta.as_ref().map(|d| d.iter().all(|&x| x >= 0.0))
    }
}

/// Target loss both runs are known to reach: the worse of the two best losses, with slack.
pub fn matched_target(a: &RunOutput, b: &RunOutput) -> f64 {
    a.best_loss().max(b.best_loss()) * MATCHED_LOSS_SLACK
}

/// Compare two parsed configs on the same problem at a matched loss target.
pub fn compare_configs(a: RunConfig, b: RunConfig, target: Option<f64>, out: &Path) -> Result<CompareReport> {
    if a.problem != b.problem {
        return Err(Error::config(
            "problem",
            "both configs must describe the same problem (including its seed)",
        ));
    }
    if a.pruning_thresholds != b.pruning_thresholds {
        return Err(Error::config("pruning_thresholds", "both configs must use the same thresholds"));
    }
    let ra = execute(a, out)?;
    let rb = execute(b, out)?;
    let (target, source) = match target {
        Some(t) => (t, "explicit"),
        None => (matched_target(&ra.output, &rb.output), "matched_best"),
    };
    let comparison = matched_loss_compare(&ra.output.trace, &rb.output.trace, target);
    let side = |r: &RunArtifacts| CompareSide {
        run_id: r.run_id.clone(),
        optimizer: r.config.optimizer.to_string(),
        aborted: r.aborted(),
        best_loss: finite(r.output.best_loss()),
    };
    let report = CompareReport {
        a: side(&ra),
        b: side(&rb),
        target_source: source.into(),
        pruning_thresholds: ra.output.pruning_thresholds.clone(),
        sparsity_delta: comparison.sparsity_delta(),
        comparison,
    };
    let path = out.join(format!("compare-{}-{}.json", ra.run_id, rb.run_id));
    let body = serde_json::to_string_pretty(&report).expect("report serializes");
    atomic_write(&path, body.as_bytes())?;
    Ok(report)
}

pub fn cmd_compare(
    config_a: &Path,
    config_b: &Path,
    overrides: &[String],
    seed: Option<u64>,
    target: Option<f64>,
    out: &Path,
) -> Result<CompareReport> {
    let overrides = with_seed(overrides.to_vec(), seed);
    let a = load_config(config_a, &overrides)?;
    let b = load_config(config_b, &overrides)?;
    compare_configs(a, b, target, out)
}

pub const DEFAULT_PROX_CASES: usize = 10_000;
pub const DEFAULT_PROX_TOL: f64 = 1e-8;

/// Certify the closed-form prox against the golden-section oracle.
pub fn cmd_prox_check(n_cases: usize, seed: u64, tolerance: f64) -> Result<OracleReport> {
    if tolerance.is_nan() || tolerance < 0.0 {
        return Err(Error::config("tol", "tolerance must be nonnegative"));
    }
    oracle::prox_check(prox_huber, n_cases, seed, tolerance)
}

pub const DEFAULT_GRAD_TOL: f64 = 1e-6;
/// Coordinates within this distance of a Huber kink are excluded from the check.
pub const KINK_EXCLUSION: f64 = 1e-4;
const REGULARIZER_DIM: usize = 8;
const REGULARIZER_STEP: f64 = 1e-6;
const REGULARIZER_BLOCK: usize = 100;
const PROBLEM_STEP: f64 = 1e-6;
/// Relative tolerance for problem gradients; central differences on the MLP sit near 1e-8.
pub const PROBLEM_TOL: f64 = 1e-5;
const PROBLEM_POINTS_CAP: usize = 20;

/// Central differences of `regularizer_value` against `regularizer_grad` at `n_points`
/// seeded points. Points come in blocks that share a per-coordinate threshold vector; any
/// point with a coordinate within [`KINK_EXCLUSION`] of its threshold is skipped.
pub fn regularizer_grad_check(n_points: usize, seed: u64, tolerance: f64) -> Result<OracleReport> {
    if n_points == 0 {
        return Err(Error::config("cases", "need at least one point"));
    }
    let d = REGULARIZER_DIM;
    let mut rng = SplitMix64::new(seed);
    let mut merged: Option<OracleReport> = None;
    let mut offset = 0;
    while offset < n_points {
        let block = REGULARIZER_BLOCK.min(n_points - offset);
        let deltas: Vec<f64> = (0..d).map(|_| rng.uniform_open_closed(5.0)).collect();
        let points: Vec<Vec<f64>> = (0..block)
            .map(|_| deltas.iter().map(|&dl| dl * rng.uniform(-3.0, 3.0)).collect())
            .collect();
        let mut r = oracle::grad_check(
            |x| regularizer_value(x, Deltas::PerElement(&deltas)).expect("valid point"),
            |x| regularizer_grad(x, Deltas::PerElement(&deltas)).expect("valid point"),
            &points,
            REGULARIZER_STEP,
            |x| x.iter().zip(&deltas).any(|(a, dl)| (a.abs() - dl).abs() < KINK_EXCLUSION),
            ErrorScale::Absolute,
            tolerance,
        );
        if let Some(WorstCase::Gradient { point, .. }) = r.worst_case_input.as_mut() {
            *point += offset;
        }
        merged = Some(match merged {
            Some(m) if m.max_abs_error >= r.max_abs_error || r.worst_case_input.is_none() => OracleReport {
                cases_run: m.cases_run + r.cases_run,
                passed: m.passed && r.passed,
                ..m
            },
            Some(m) => OracleReport {
                cases_run: m.cases_run + r.cases_run,
                passed: m.passed && r.passed,
                ..r
            },
            None => r,
        });
        offset += block;
    }
    Ok(merged.expect("at least one block"))
}

/// Central differences of a problem's loss against its analytic gradient (full batch) at
/// seeded perturbations of its starting point, scored relatively.
pub fn problem_grad_check(config: &RunConfig, n_points: usize, seed: u64, tolerance: f64) -> Result<OracleReport> {
    if n_points == 0 {
        return Err(Error::config("cases", "need at least one point"));
    }
    let problem = config.problem.build()?;
    let init = problem.flat_init();
    let mut rng = SplitMix64::new(seed);
    let points: Vec<Vec<f64>> = (0..n_points)
        .map(|_| init.iter().map(|x| x + 0.5 * rng.normal()).collect())
        .collect();
    Ok(oracle::grad_check(
        |x| problem.flat_loss(x, &Batch::Full),
        |x| problem.flat_grad(x, &Batch::Full),
        &points,
        PROBLEM_STEP,
        |_| false,
        ErrorScale::Relative,
        tolerance,
    ))
}

#[derive(Clone, Debug, Serialize)]
pub struct GradCheckReport {
    pub regularizer: OracleReport,
    pub problem: Option<OracleReport>,
    pub passed: bool,
}

/// Regularizer gradient check, plus the configured problem's gradient when a config is given.
pub fn cmd_grad_check(
    config: Option<(&Path, &[String])>,
    n_cases: usize,
    seed: u64,
    tolerance: f64,
) -> Result<GradCheckReport> {
    let regularizer = regularizer_grad_check(n_cases, seed, tolerance)?;
    let problem = match config {
        Some((path, overrides)) => {
            let cfg = load_config(path, overrides)?;
            Some(problem_grad_check(&cfg, n_cases.min(PROBLEM_POINTS_CAP), seed, PROBLEM_TOL)?)
        }
        None => None,
    };
    let passed = regularizer.passed && problem.as_ref().is_none_or(|p| p.passed);
    Ok(GradCheckReport {
        regularizer,
        problem,
        passed,
    })
}
