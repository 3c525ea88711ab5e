//! Report emission: detection-ratio curves and benchmark tables as CSV,
//! JSON, or SVG. Outputs carry no timestamps, so a rerun with the same seed
//! writes byte-identical files.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harness::{DistanceBenchmark, DriftCurve};

/// Output format of a report file.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReportFormat {
    Csv,
    Json,
    Svg,
}

impl std::str::FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(ReportFormat::Csv),
            "json" => Ok(ReportFormat::Json),
            "svg" => Ok(ReportFormat::Svg),
            other => Err(Error::InvalidParameter(format!(
                "unknown report format `{other}`"
            ))),
        }
    }
}

/// Render detection-ratio curves in the requested format.
pub fn render_curves(curves: &[DriftCurve], format: ReportFormat) -> Result<String> {
    if curves.is_empty() {
        return Err(Error::EmptyInput);
    }
    match format {
        ReportFormat::Csv => Ok(curves_csv(curves)),
        ReportFormat::Json => Ok(serde_json::to_string_pretty(curves)? + "\n"),
        ReportFormat::Svg => Ok(curves_svg(curves)),
    }
}

/// Write detection-ratio curves to a file.
pub fn emit_curves(curves: &[DriftCurve], format: ReportFormat, path: &Path) -> Result<()> {
    std::fs::write(path, render_curves(curves, format)?)?;
    Ok(())
}

/// Render a distance benchmark in the requested format.
pub fn render_benchmark(bench: &DistanceBenchmark, format: ReportFormat) -> Result<String> {
    if bench.measurements.is_empty() {
        return Err(Error::EmptyInput);
    }
    match format {
        ReportFormat::Csv => Ok(benchmark_csv(bench)),
        ReportFormat::Json => Ok(serde_json::to_string_pretty(bench)? + "\n"),
        ReportFormat::Svg => Ok(benchmark_svg(bench)),
    }
}

/// Write a distance benchmark to a file.
pub fn emit_benchmark(bench: &DistanceBenchmark, format: ReportFormat, path: &Path) -> Result<()> {
    std::fs::write(path, render_benchmark(bench, format)?)?;
    Ok(())
}

fn curves_csv(curves: &[DriftCurve]) -> String {
    let mut out = String::from(
        "config_id,drift_kind,severity,trials,failures,detections,ratio,ci_low,ci_high\n",
    );
    for c in curves {
        for l in &c.levels {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{}",
                c.config_id.name(),
                c.drift_kind.name(),
                l.severity,
                l.trials,
                l.failures,
                l.detections,
                l.ratio,
                l.ci_low,
                l.ci_high
            );
        }
    }
    out
}

const PALETTE: [&str; 8] = [
    "#1b6ca8", "#d1495b", "#66a182", "#edae49", "#8d5a97", "#00798c", "#a44a3f", "#5b5b5b",
];

const VIEW_W: f64 = 800.0;
const VIEW_H: f64 = 500.0;
const MARGIN_LEFT: f64 = 60.0;
const MARGIN_RIGHT: f64 = 200.0;
const MARGIN_TOP: f64 = 20.0;
const MARGIN_BOTTOM: f64 = 45.0;

/// Line chart of detection ratio against severity, one polyline per curve,
/// fixed 800x500 viewport.
fn curves_svg(curves: &[DriftCurve]) -> String {
    let plot_w = VIEW_W - MARGIN_LEFT - MARGIN_RIGHT;
    let plot_h = VIEW_H - MARGIN_TOP - MARGIN_BOTTOM;
    let max_sev = curves
        .iter()
        .flat_map(|c| c.levels.iter().map(|l| l.severity))
        .max()
        .unwrap_or(10)
        .max(1) as f64;
    let x = |sev: f64| MARGIN_LEFT + sev / max_sev * plot_w;
    let y = |ratio: f64| MARGIN_TOP + (1.0 - ratio) * plot_h;

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {VIEW_W} {VIEW_H}" width="{VIEW_W}" height="{VIEW_H}">"#
    );
    let _ = writeln!(svg, r#"<rect width="{VIEW_W}" height="{VIEW_H}" fill="white"/>"#);

    // Axes.
    let _ = writeln!(
        svg,
        r#"<line x1="{}" y1="{}" x2="{}" y2="{}" stroke="black" stroke-width="1"/>"#,
        MARGIN_LEFT,
        MARGIN_TOP + plot_h,
        MARGIN_LEFT + plot_w,
        MARGIN_TOP + plot_h
    );
    let _ = writeln!(
        svg,
        r#"<line x1="{}" y1="{}" x2="{}" y2="{}" stroke="black" stroke-width="1"/>"#,
        MARGIN_LEFT,
        MARGIN_TOP,
        MARGIN_LEFT,
        MARGIN_TOP + plot_h
    );
    for tick in 0..=10 {
        let sev = tick as f64 * max_sev / 10.0;
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{}" font-size="11" text-anchor="middle">{:.0}</text>"#,
            x(sev),
            MARGIN_TOP + plot_h + 16.0,
            sev
        );
    }
    for tick in 0..=5 {
        let ratio = tick as f64 / 5.0;
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{}" font-size="11" text-anchor="end">{ratio:.1}</text>"#,
            MARGIN_LEFT - 6.0,
            y(ratio) + 4.0
        );
    }
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="{}" font-size="12" text-anchor="middle">drift severity level</text>"#,
        MARGIN_LEFT + plot_w / 2.0,
        VIEW_H - 8.0
    );
    let _ = writeln!(
        svg,
        r#"<text x="14" y="{}" font-size="12" text-anchor="middle" transform="rotate(-90 14 {})">detection ratio</text>"#,
        MARGIN_TOP + plot_h / 2.0,
        MARGIN_TOP + plot_h / 2.0
    );

    // One polyline per curve, with a legend entry.
    for (i, c) in curves.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let points: Vec<String> = c
            .levels
            .iter()
            .map(|l| format!("{:.2},{:.2}", x(l.severity as f64), y(l.ratio)))
            .collect();
        let _ = writeln!(
            svg,
            r#"<polyline fill="none" stroke="{color}" stroke-width="2" points="{}"/>"#,
            points.join(" ")
        );
        let ly = MARGIN_TOP + 14.0 + i as f64 * 18.0;
        let lx = MARGIN_LEFT + plot_w + 14.0;
        let _ = writeln!(
            svg,
            r#"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="2"/>"#,
            lx + 18.0
        );
        let label = if curves.iter().any(|o| o.drift_kind != c.drift_kind) {
            format!("{} ({})", c.config_id.name(), c.drift_kind.name())
        } else {
            c.config_id.name().to_string()
        };
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{}" font-size="11">{label}</text>"#,
            lx + 24.0,
            ly + 4.0
        );
    }
    svg.push_str("</svg>\n");
    svg
}

fn benchmark_csv(bench: &DistanceBenchmark) -> String {
    let mut out =
        String::from("family,method,trials,failures,mae_mean,mae_std,rmse_mean,rmse_std\n");
    for m in &bench.measurements {
        let (mae_mean, mae_std) = m.mean_std_mae().unwrap_or((f64::NAN, f64::NAN));
        let (rmse_mean, rmse_std) = m.mean_std_rmse().unwrap_or((f64::NAN, f64::NAN));
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            m.family.name(),
            m.method,
            m.mae.len(),
            m.failures,
            mae_mean,
            mae_std,
            rmse_mean,
            rmse_std
        );
    }
    out
}

/// Text-grid rendering of the benchmark table.
fn benchmark_svg(bench: &DistanceBenchmark) -> String {
    let rows = &bench.measurements;
    let row_h = 22.0;
    let header_h = 30.0;
    let height = header_h + rows.len() as f64 * row_h + 20.0;
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 700 {height}" width="700" height="{height}">"#
    );
    let _ = writeln!(svg, r#"<rect width="700" height="{height}" fill="white"/>"#);
    let cols = [
        (10.0, "family"),
        (130.0, "method"),
        (330.0, "mae"),
        (510.0, "rmse"),
    ];
    for (cx, name) in cols {
        let _ = writeln!(
            svg,
            r#"<text x="{cx}" y="20" font-size="13" font-weight="bold">{name}</text>"#
        );
    }
    for (i, m) in rows.iter().enumerate() {
        let ty = header_h + i as f64 * row_h + 14.0;
        let (mae_mean, mae_std) = m.mean_std_mae().unwrap_or((f64::NAN, f64::NAN));
        let (rmse_mean, rmse_std) = m.mean_std_rmse().unwrap_or((f64::NAN, f64::NAN));
        let _ = writeln!(
            svg,
            r#"<text x="10" y="{ty}" font-size="12">{}</text>"#,
            m.family.name()
        );
        let _ = writeln!(
            svg,
            r#"<text x="130" y="{ty}" font-size="12">{}</text>"#,
            m.method
        );
        let _ = writeln!(
            svg,
            r#"<text x="330" y="{ty}" font-size="12">{mae_mean:.4} &#177; {mae_std:.4}</text>"#
        );
        let _ = writeln!(
            svg,
            r#"<text x="510" y="{ty}" font-size="12">{rmse_mean:.4} &#177; {rmse_std:.4}</text>"#
        );
    }
    svg.push_str("</svg>\n");
    svg
}
