//! Run artifacts: metrics CSV, summary JSON and SVG charts, each written atomically.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;

use serde_json::{json, Value};

use super::{RunOutput, TracePoint};
use crate::config::RunConfig;
use crate::error::Result;

/// Loss fractions of the initial loss used when the config names no explicit targets.
const DEFAULT_TARGET_FRACTIONS: [f64; 4] = [0.5, 0.1, 0.01, 1e-3];

const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

/// Write `bytes` to `path` through a temporary file in the same directory.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

fn opt_num(x: Option<f64>) -> String {
    x.map_or_else(String::new, |v| v.to_string())
}

/// One row per (record, group).
pub fn metrics_csv(output: &RunOutput) -> String {
    let mut s = String::from("step,lr,loss,grad_norm,group,mean_abs,max_abs,delta");
    for t in &output.pruning_thresholds {
        let _ = write!(s, ",sparsity@{t}");
    }
    s.push('\n');
    for r in &output.records {
        for g in &r.groups {
            let _ = write!(
                s,
                "{},{},{},{},{},{},{},{}",
                r.step,
                r.lr,
                r.loss,
                r.grad_norm,
                g.group,
                g.mean_abs,
                g.max_abs,
                opt_num(g.delta)
            );
            for v in &g.sparsity {
                let _ = write!(s, ",{v}");
            }
            s.push('\n');
        }
    }
    s
}

/// First step at which the loss reaches each target. Explicit targets come from the
/// config; otherwise fixed fractions of the initial loss are used.
pub fn steps_to_target(config: &RunConfig, trace: &[TracePoint]) -> Vec<(f64, Option<u64>)> {
    let targets: Vec<f64> = if config.loss_targets.is_empty() {
        let initial = trace.first().map_or(f64::NAN, |p| p.loss);
        DEFAULT_TARGET_FRACTIONS.iter().map(|f| f * initial).collect()
    } else {
        config.loss_targets.clone()
    };
    targets
        .into_iter()
        .map(|t| (t, trace.iter().find(|p| p.loss <= t).map(|p| p.step)))
        .collect()
}

fn finite_or_null(x: f64) -> Value {
    if x.is_finite() {
        json!(x)
    } else {
        Value::Null
    }
}

pub fn summary_json(run_id: &str, config: &RunConfig, output: &RunOutput) -> Value {
    let last = output.records.last();
    let groups: Vec<Value> = last
        .map(|r| {
            r.groups
                .iter()
                .map(|g| {
                    json!({
                        "group": g.group,
                        "mean_abs": finite_or_null(g.mean_abs),
                        "max_abs": finite_or_null(g.max_abs),
                        "delta": g.delta.map(|d| if d.is_finite() { json!(d) } else { json!("inf") }),
                        "sparsity": g.sparsity.iter().map(|&v| finite_or_null(v)).collect::<Vec<_>>(),
                        "histogram": g.histogram,
                    })
                })
                .collect()
        })
        .unwrap_or_default();
    let targets: Vec<Value> = steps_to_target(config, &output.trace)
        .into_iter()
        .map(|(t, s)| json!({"target": finite_or_null(t), "step": s}))
        .collect();
    json!({
        "run_id": run_id,
        "config": config,
        "status": if output.abort.is_some() { "aborted" } else { "completed" },
        "abort": output.abort,
        "pruning_thresholds": output.pruning_thresholds,
        "histogram_range": {"min": super::HIST_MIN, "max": super::HIST_MAX, "bins": super::HIST_BINS},
        "final": {
            "step": last.map(|r| r.step),
            "loss": finite_or_null(output.final_loss()),
            "best_loss": finite_or_null(output.best_loss()),
            "groups": groups,
        },
        "steps_to_target": targets,
    })
}

pub struct ChartSeries {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

/// A plain SVG line chart. Non-finite points (and non-positive ones on a log axis) are
/// dropped.
pub fn line_chart_svg(title: &str, x_label: &str, y_label: &str, series: &[ChartSeries], log_y: bool) -> String {
    const W: f64 = 640.0;
    const H: f64 = 360.0;
    const L: f64 = 64.0;
    const R: f64 = 16.0;
    const T: f64 = 32.0;
    const B: f64 = 44.0;
    let ty = |y: f64| if log_y { y.log10() } else { y };
    let keep = |&(x, y): &(f64, f64)| x.is_finite() && y.is_finite() && (!log_y || y > 0.0);
    let pts: Vec<Vec<(f64, f64)>> = series
        .iter()
        .map(|s| s.points.iter().copied().filter(keep).map(|(x, y)| (x, ty(y))).collect())
        .collect();
    let all = pts.iter().flatten();
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in all {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if !x0.is_finite() {
        (x0, x1, y0, y1) = (0.0, 1.0, 0.0, 1.0);
    }
    if x1 <= x0 {
        x1 = x0 + 1.0;
    }
    if y1 <= y0 {
        y0 -= 0.5;
        y1 += 0.5;
    }
    let sx = |x: f64| L + (x - x0) / (x1 - x0) * (W - L - R);
    let sy = |y: f64| H - B - (y - y0) / (y1 - y0) * (H - T - B);
    let label = |y: f64| {
        let v = if log_y { 10f64.powf(y) } else { y };
        format!("{v:.3e}")
    };

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="20" text-anchor="middle" font-size="14">{}</text>"#, W / 2.0, escape(title));
    let _ = writeln!(
        s,
        r#"<path d="M{L} {T} V{} H{}" fill="none" stroke="black"/>"#,
        H - B,
        W - R
    );
    for i in 0..=4 {
        let fy = y0 + (y1 - y0) * i as f64 / 4.0;
        let fx = x0 + (x1 - x0) * i as f64 / 4.0;
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{:.1}" text-anchor="end">{}</text>"#,
            L - 4.0,
            sy(fy) + 4.0,
            label(fy)
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{}" text-anchor="middle">{}</text>"#,
            sx(fx),
            H - B + 14.0,
            format_tick(fx)
        );
    }
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, (L + W - R) / 2.0, H - 8.0, escape(x_label));
    let _ = writeln!(
        s,
        r#"<text x="14" y="{}" text-anchor="middle" transform="rotate(-90 14 {})">{}</text>"#,
        H / 2.0,
        H / 2.0,
        escape(y_label)
    );
    for (i, (ser, p)) in series.iter().zip(&pts).enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        if !p.is_empty() {
            let path: Vec<String> = p.iter().map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y))).collect();
            let _ = writeln!(
                s,
                r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"#,
                path.join(" ")
            );
        }
        let ly = T + 14.0 * i as f64 + 6.0;
        let _ = writeln!(
            s,
            r#"<line x1="{}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="2"/><text x="{}" y="{}">{}</text>"#,
            W - R - 150.0,
            W - R - 130.0,
            W - R - 125.0,
            ly + 4.0,
            escape(&ser.label)
        );
    }
    s.push_str("</svg>\n");
    s
}

fn format_tick(x: f64) -> String {
    if x.fract() == 0.0 && x.abs() < 1e9 {
        format!("{x}")
    } else {
        format!("{x:.3}")
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn run_charts(output: &RunOutput) -> Vec<(&'static str, String)> {
    let loss = ChartSeries {
        label: "train loss".into(),
        points: output.trace.iter().map(|p| (p.step as f64, p.loss)).collect(),
    };
    let sparsity: Vec<ChartSeries> = output
        .pruning_thresholds
        .iter()
        .enumerate()
        .map(|(i, t)| ChartSeries {
            label: format!("|θ| < {t}"),
            points: output.trace.iter().map(|p| (p.step as f64, p.sparsity[i])).collect(),
        })
        .collect();
    let mut delta: Vec<ChartSeries> = Vec::new();
    if let Some(first) = output.records.first() {
        for (gi, g) in first.groups.iter().enumerate() {
            if g.delta.is_some() {
                delta.push(ChartSeries {
                    label: g.group.clone(),
                    points: output
                        .records
                        .iter()
                        .filter_map(|r| r.groups[gi].delta.map(|d| (r.step as f64, d)))
                        .collect(),
                });
            }
        }
    }
    let mut charts = vec![
        ("loss.svg", line_chart_svg("Training loss", "step", "loss", &[loss], true)),
        (
            "sparsity.svg",
            line_chart_svg("Pruning sparsity", "step", "fraction", &sparsity, false),
        ),
    ];
    if !delta.is_empty() {
        charts.push(("delta.svg", line_chart_svg("Huber threshold", "step", "delta", &delta, true)));
    }
    charts
}

/// Write `config.json`, `metrics.csv`, `summary.json` and (optionally) `charts/*.svg`
/// into `dir`.
pub fn write_run_artifacts(dir: &Path, run_id: &str, config: &RunConfig, output: &RunOutput) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let cfg = serde_json::to_string_pretty(config).expect("config serializes");
    atomic_write(&dir.join("config.json"), cfg.as_bytes())?;
    atomic_write(&dir.join("metrics.csv"), metrics_csv(output).as_bytes())?;
    let summary = serde_json::to_string_pretty(&summary_json(run_id, config, output)).expect("summary serializes");
    atomic_write(&dir.join("summary.json"), summary.as_bytes())?;
    if config.charts {
        for (name, svg) in run_charts(output) {
            atomic_write(&dir.join("charts").join(name), svg.as_bytes())?;
        }
    }
    Ok(())
}
