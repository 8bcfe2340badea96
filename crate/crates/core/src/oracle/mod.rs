//! Brute-force verifiers.
//!
//! Nothing here calls into `regularizer`, `proximal`, `threshold` or `optim`; the formulas are
//! transcribed again from scratch so the oracles can serve as differential-testing partners.

mod replay;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::SplitMix64;

pub use replay::{replay_reference, ReplayConfig};

/// `1/φ` with `φ` the golden ratio.
const INV_PHI: f64 = 0.618_033_988_749_894_9;

/// Interval width at which [`prox_oracle`] stops.
pub const PROX_ORACLE_WIDTH: f64 = 1e-10;
pub const GOLDEN_MAX_ITER: usize = 80;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GoldenResult {
    pub x: f64,
    pub iterations: usize,
    pub width: f64,
}

/// Golden-section search for the minimizer of a unimodal function on `[lo, hi]`.
///
/// Points are compared through `diff(b, c) = f(b) − f(c)` rather than two separate
/// evaluations, so callers can supply a cancellation-free difference when `f` itself is
/// large near its minimum.
pub fn golden_section_by_difference<D>(diff: D, lo: f64, hi: f64, width: f64, max_iter: usize) -> GoldenResult
where
    D: Fn(f64, f64) -> f64,
{
    let (mut a, mut d) = (lo, hi);
    let mut b = d - INV_PHI * (d - a);
    let mut c = a + INV_PHI * (d - a);
    let mut iterations = 0;
    while d - a > width && iterations < max_iter {
        iterations += 1;
        if diff(b, c) < 0.0 {
            d = c;
            c = b;
            b = d - INV_PHI * (d - a);
        } else {
            a = b;
            b = c;
            c = a + INV_PHI * (d - a);
        }
    }
    GoldenResult {
        x: 0.5 * (a + d),
        iterations,
        width: d - a,
    }
}

/// Golden-section search comparing plain function values.
pub fn golden_section_minimize<F>(f: F, lo: f64, hi: f64, width: f64, max_iter: usize) -> GoldenResult
where
    F: Fn(f64) -> f64,
{
    golden_section_by_difference(|b, c| f(b) - f(c), lo, hi, width, max_iter)
}

/// `H_δ(b) − H_δ(c)`, pivoting through the kink when the points sit on different branches.
fn huber_increment(b: f64, c: f64, delta: f64) -> f64 {
    let (ab, ac) = (b.abs(), c.abs());
    match (ab <= delta, ac <= delta) {
        (true, true) => 0.5 * (b - c) * (b + c),
        (false, false) => delta * (ab - ac),
        (false, true) => delta * (ab - delta) + 0.5 * (delta - ac) * (delta + ac),
        (true, false) => -(delta * (ac - delta) + 0.5 * (delta - ab) * (delta + ab)),
    }
}

/// `φ(b) − φ(c)` for `φ(x) = ½(x − y)² + τ·H_δ(x)`.
fn prox_objective_increment(b: f64, c: f64, y: f64, tau: f64, delta: f64) -> f64 {
    0.5 * (b - c) * ((b - y) + (c - y)) + tau * huber_increment(b, c, delta)
}

/// Minimizer of `½(x − y)² + τ·H_δ(x)` by golden-section search on
/// `[−|y|−δ−1, |y|+δ+1]`, stopped at width `1e-10`.
pub fn prox_oracle(y: f64, tau: f64, delta: f64) -> Result<f64> {
    if !y.is_finite() {
        return Err(Error::Domain(format!("prox oracle needs finite y, got {y}")));
    }
    if !(tau.is_finite() && tau >= 0.0) {
        return Err(Error::Domain(format!("prox oracle needs tau >= 0, got {tau}")));
    }
    if !(delta.is_finite() && delta > 0.0) {
        return Err(Error::Domain(format!("prox oracle needs delta > 0, got {delta}")));
    }
    let r = y.abs() + delta + 1.0;
    let res = golden_section_by_difference(
        |b, c| prox_objective_increment(b, c, y, tau, delta),
        -r,
        r,
        PROX_ORACLE_WIDTH,
        GOLDEN_MAX_ITER,
    );
    Ok(res.x)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum WorstCase {
    Prox {
        y: f64,
        tau: f64,
        delta: f64,
        closed_form: f64,
        oracle: f64,
    },
    Gradient {
        point: usize,
        coordinate: usize,
        analytic: f64,
        numeric: f64,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleReport {
    pub cases_run: usize,
    pub max_abs_error: f64,
    pub worst_case_input: Option<WorstCase>,
    pub tolerance: f64,
    pub passed: bool,
}

impl OracleReport {
    fn new(tolerance: f64) -> Self {
        Self {
            cases_run: 0,
            max_abs_error: 0.0,
            worst_case_input: None,
            tolerance,
            passed: false,
        }
    }

    fn observe(&mut self, err: f64, case: impl FnOnce() -> WorstCase) {
        if self.worst_case_input.is_none() || err > self.max_abs_error || err.is_nan() {
            self.max_abs_error = err;
            self.worst_case_input = Some(case());
        }
    }

    fn finish(mut self) -> Self {
        self.passed = self.max_abs_error <= self.tolerance;
        self
    }
}

/// Random `(y, τ, δ)` with `y ∈ [−10, 10]`, `τ ∈ (0, 2]`, `δ ∈ (0, 5]`.
pub fn prox_cases(n: usize, seed: u64) -> Vec<(f64, f64, f64)> {
    let mut rng = SplitMix64::new(seed);
    (0..n)
        .map(|_| {
            let y = rng.uniform(-10.0, 10.0);
            let tau = rng.uniform_open_closed(2.0);
            let delta = rng.uniform_open_closed(5.0);
            (y, tau, delta)
        })
        .collect()
}

/// Certify a closed-form prox against [`prox_oracle`] on seeded random triples.
pub fn prox_check<P>(closed_form: P, n_cases: usize, seed: u64, tolerance: f64) -> Result<OracleReport>
where
    P: Fn(f64, f64, f64) -> Result<f64>,
{
    if n_cases == 0 {
        return Err(Error::Domain("prox check needs at least one case".into()));
    }
    let mut report = OracleReport::new(tolerance);
    for (y, tau, delta) in prox_cases(n_cases, seed) {
        let cf = closed_form(y, tau, delta)?;
        let or = prox_oracle(y, tau, delta)?;
        report.cases_run += 1;
        report.observe((cf - or).abs(), || WorstCase::Prox {
            y,
            tau,
            delta,
            closed_form: cf,
            oracle: or,
        });
    }
    Ok(report.finish())
}

/// How [`grad_check`] scores a mismatch.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ErrorScale {
    Absolute,
    /// `|a − n| / max(1, |a|, |n|)`.
    Relative,
}

/// Compare an analytic gradient against central differences at every point.
///
/// Points for which `exclude` returns true are skipped without counting as cases.
pub fn grad_check<F, G, X>(
    f: F,
    grad: G,
    points: &[Vec<f64>],
    h: f64,
    exclude: X,
    scale: ErrorScale,
    tolerance: f64,
) -> OracleReport
where
    F: Fn(&[f64]) -> f64,
    G: Fn(&[f64]) -> Vec<f64>,
    X: Fn(&[f64]) -> bool,
{
    let mut report = OracleReport::new(tolerance);
    let mut x = Vec::new();
    for (pi, p) in points.iter().enumerate() {
        if exclude(p) {
            continue;
        }
        let analytic = grad(p);
        x.clear();
        x.extend_from_slice(p);
        for i in 0..p.len() {
            let orig = x[i];
            x[i] = orig + h;
            let up = f(&x);
            x[i] = orig - h;
            let down = f(&x);
            x[i] = orig;
            let numeric = (up - down) / (2.0 * h);
            let a = analytic[i];
            let err = match scale {
                ErrorScale::Absolute => (a - numeric).abs(),
                ErrorScale::Relative => (a - numeric).abs() / 1f64.max(a.abs()).max(numeric.abs()),
            };
            report.observe(err, || WorstCase::Gradient {
                point: pi,
                coordinate: i,
                analytic: a,
                numeric,
            });
        }
        report.cases_run += 1;
    }
    report.finish()
}
