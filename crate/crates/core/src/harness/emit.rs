//! Report output: JSON, per-case CSV and small SVG plots.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use super::{Experiment, Report};
use crate::error::{HctError, Result};

/// Pretty JSON with map keys sorted.
pub fn to_json(report: &Report) -> Result<String> {
    // Round-tripping through `Value` sorts struct fields as well as maps.
    let value = serde_json::to_value(report).map_err(|e| HctError::InvalidParameter(format!("serialize report: {e}")))?;
    serde_json::to_string_pretty(&value).map_err(|e| HctError::InvalidParameter(format!("serialize report: {e}")))
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// One row per case: id, every parameter, every metric, skip reason.
pub fn to_csv(report: &Report) -> String {
    let mut params: Vec<&str> = report.cases.iter().flat_map(|c| c.params.keys().map(String::as_str)).collect();
    params.sort_unstable();
    params.dedup();
    let mut metrics: Vec<&str> = report.cases.iter().flat_map(|c| c.metrics.keys().map(String::as_str)).collect();
    metrics.sort_unstable();
    metrics.dedup();
    let mut out = String::from("id");
    for h in params.iter().chain(&metrics) {
        out.push(',');
        out.push_str(&csv_field(h));
    }
    out.push_str(",skipped\n");
    for case in &report.cases {
        out.push_str(&csv_field(&case.id));
        for p in &params {
            out.push(',');
            match case.params.get(*p) {
                Some(serde_json::Value::String(s)) => out.push_str(&csv_field(s)),
                Some(v) => out.push_str(&csv_field(&v.to_string())),
                None => {}
            }
        }
        for m in &metrics {
            out.push(',');
            if let Some(v) = case.metrics.get(*m) {
                let _ = write!(out, "{v}");
            }
        }
        out.push(',');
        out.push_str(&csv_field(case.skipped.as_deref().unwrap_or("")));
        out.push('\n');
    }
    out
}

type Series = BTreeMap<String, Vec<(f64, f64)>>;

fn series(report: &Report, x_param: &str, x_map: impl Fn(f64) -> f64, y_metric: &str, group: &[&str]) -> Series {
    let mut out = Series::new();
    for case in report.cases.iter().filter(|c| c.skipped.is_none()) {
        let (Some(x), Some(&y)) = (case.params.get(x_param).and_then(|v| v.as_f64()), case.metrics.get(y_metric)) else {
            continue;
        };
        if !y.is_finite() {
            continue;
        }
        let key: Vec<String> =
            group.iter().filter_map(|g| case.params.get(*g)).map(|v| v.as_str().map_or_else(|| v.to_string(), str::to_string)).collect();
        out.entry(key.join(" ")).or_default().push((x_map(x), y));
    }
    for pts in out.values_mut() {
        pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    }
    out
}

const PALETTE: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf", "#8c564b", "#e377c2"];

/// Polyline plot, one line per series, with a logarithmic y axis when `log_y`.
pub fn svg_plot(title: &str, x_label: &str, y_label: &str, data: &Series, log_y: bool) -> String {
    let (w, h, pad) = (640.0, 420.0, 56.0);
    let ty = |y: f64| if log_y { y.max(f64::MIN_POSITIVE).log10() } else { y };
    let pts = data.values().flatten();
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in pts {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(ty(y));
        y1 = y1.max(ty(y));
    }
    if !x0.is_finite() {
        (x0, x1, y0, y1) = (0.0, 1.0, 0.0, 1.0);
    }
    if x1 <= x0 {
        x1 = x0 + 1.0;
    }
    if y1 <= y0 {
        y1 = y0 + 1.0;
    }
    let sx = |x: f64| pad + (x - x0) / (x1 - x0) * (w - 2.0 * pad);
    let sy = |y: f64| h - pad - (ty(y) - y0) / (y1 - y0) * (h - 2.0 * pad);
    let mut svg = String::new();
    let _ = writeln!(svg, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" font-family="sans-serif" font-size="12">"#);
    let _ = writeln!(svg, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(svg, r#"<text x="{}" y="20" text-anchor="middle" font-size="14">{}</text>"#, w / 2.0, escape(title));
    let _ = writeln!(svg, r#"<path d="M{pad},{pad} V{} H{}" fill="none" stroke="black"/>"#, h - pad, w - pad);
    let _ = writeln!(svg, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, w / 2.0, h - 16.0, escape(x_label));
    let _ = writeln!(
        svg,
        r#"<text x="16" y="{}" text-anchor="middle" transform="rotate(-90 16 {})">{}</text>"#,
        h / 2.0,
        h / 2.0,
        escape(&if log_y { format!("log10 {y_label}") } else { y_label.to_string() })
    );
    for (label, value) in [(format!("{x0:.3}"), pad), (format!("{x1:.3}"), w - pad)] {
        let _ = writeln!(svg, r#"<text x="{value}" y="{}" text-anchor="middle">{label}</text>"#, h - pad + 16.0);
    }
    for (label, value) in [(format!("{y0:.3}"), h - pad), (format!("{y1:.3}"), pad)] {
        let _ = writeln!(svg, r#"<text x="{}" y="{value}" text-anchor="end">{label}</text>"#, pad - 4.0);
    }
    for (i, (name, pts)) in data.iter().enumerate() {
        let colour = PALETTE[i % PALETTE.len()];
        let coords: Vec<String> = pts.iter().map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y))).collect();
        let _ = writeln!(svg, r#"<polyline points="{}" fill="none" stroke="{colour}" stroke-width="1.5"/>"#, coords.join(" "));
        let _ = writeln!(svg, r#"<text x="{}" y="{}" fill="{colour}">{}</text>"#, w - pad + 4.0 - 120.0, pad + 14.0 * i as f64, escape(name));
    }
    svg.push_str("</svg>\n");
    svg
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Plots for experiments with a natural one-parameter sweep.
pub fn plots(report: &Report) -> Vec<(String, String)> {
    match report.config.experiment {
        Experiment::GoodlambdaRiesz => {
            let data = series(report, "epsilon", |e| 1.0 / e, "fit_ratio", &["group"]);
            vec![("ratio_vs_inv_epsilon.svg".into(), svg_plot("good-λ ratio against 1/ε", "1/ε", "ratio", &data, true))]
        }
        Experiment::FeffermanStein => {
            let data = series(report, "p", |p| p, "ratio", &["input", "beta"]);
            vec![("ratio_vs_p.svg".into(), svg_plot("‖M f‖ / ‖M# f‖ against p", "p", "ratio", &data, false))]
        }
        Experiment::MuckenhouptWheeden => {
            let data = series(report, "p", |p| p, "strong", &["input"]);
            vec![("ratio_vs_p.svg".into(), svg_plot("‖I_α μ‖ / (p ‖M_α μ‖) against p", "p", "ratio", &data, false))]
        }
        _ => Vec::new(),
    }
}

fn write(path: &Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents).map_err(|e| HctError::io(path, e))
}

/// Writes `report.json`, `cases.csv` and any plots into `dir`.
pub fn write_report(report: &Report, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| HctError::io(dir, e))?;
    write(&dir.join("report.json"), &to_json(report)?)?;
    write(&dir.join("cases.csv"), &to_csv(report))?;
    for (name, svg) in plots(report) {
        write(&dir.join(name), &svg)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::{Case, ExperimentConfig, Verdict};

    fn sample() -> Report {
        let mut r = Report::empty(ExperimentConfig::new(Experiment::GoodlambdaRiesz));
        for (g, e, v) in [("a", 0.5, 0.3), ("a", 0.25, 0.1), ("b", 0.5, 0.2)] {
            r.cases.push(Case::new(format!("{g}/{e}")).param("group", g).param("epsilon", e).metric("fit_ratio", v));
        }
        r.cases.push(Case::new("skipped, \"quoted\"").skip("empty"));
        r.verdicts.push(Verdict::new("v", true, true, "ok"));
        r
    }

    #[test]
    fn empty_report_is_valid_json() {
        let r = Report::empty(ExperimentConfig::new(Experiment::Weak11));
        let v: serde_json::Value = serde_json::from_str(&to_json(&r).unwrap()).unwrap();
        assert_eq!(v["cases"], serde_json::json!([]));
        assert_eq!(v["config"]["experiment"], "weak11");
    }

    #[test]
    fn json_round_trips() {
        let r = sample();
        let back: Report = serde_json::from_str(&to_json(&r).unwrap()).unwrap();
        assert_eq!(back, r);
    }

    #[test]
    fn csv_has_one_row_per_case() {
        let csv = to_csv(&sample());
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "id,epsilon,group,fit_ratio,skipped");
        assert_eq!(lines.len(), 5);
        assert!(lines.iter().any(|l| l.starts_with("\"skipped, \"\"quoted\"\"\"")));
    }

    #[test]
    fn plot_has_a_line_per_group() {
        let (name, svg) = plots(&sample()).remove(0);
        assert_eq!(name, "ratio_vs_inv_epsilon.svg");
        assert_eq!(svg.matches("<polyline").count(), 2);
        assert!(svg.starts_with("<svg"));
    }

    #[test]
    fn writes_files() {
        let dir = tempfile::tempdir().unwrap();
        write_report(&sample(), dir.path()).unwrap();
        for f in ["report.json", "cases.csv", "ratio_vs_inv_epsilon.svg"] {
            assert!(dir.path().join(f).exists(), "{f}");
        }
    }
}
