//! Static SVG line charts of height moments against leaf-set size.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::error::{HarnessError, Result};
use crate::io::SummaryRow;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 150.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 50.0;
const COLORS: &[&str] = &["#1b9e77", "#d95f02", "#7570b3", "#e7298a", "#66a61e", "#e6ab02", "#a6761d", "#666666"];

/// One polyline: `(n, value)` points in increasing `n`.
#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

/// Line chart with a base-2 logarithmic horizontal axis.
pub fn render_svg(title: &str, y_label: &str, series: &[Series]) -> String {
    let points = series.iter().flat_map(|s| s.points.iter());
    let (mut x_min, mut x_max, mut y_max) = (f64::INFINITY, f64::NEG_INFINITY, 0.0f64);
    for &(x, y) in points {
        x_min = x_min.min(x.log2());
        x_max = x_max.max(x.log2());
        y_max = y_max.max(y);
    }
    if !x_min.is_finite() {
        (x_min, x_max) = (0.0, 1.0);
    }
    if x_max == x_min {
        x_max = x_min + 1.0;
    }
    let y_max = if y_max > 0.0 { y_max * 1.1 } else { 1.0 };
    let plot_w = WIDTH - LEFT - RIGHT;
    let plot_h = HEIGHT - TOP - BOTTOM;
    let sx = |x: f64| LEFT + (x.log2() - x_min) / (x_max - x_min) * plot_w;
    let sy = |y: f64| TOP + plot_h - y / y_max * plot_h;

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(svg, r#"<text x="{}" y="22" text-anchor="middle" font-size="14">{}</text>"#, LEFT + plot_w / 2.0, escape(title));
    let _ = writeln!(
        svg,
        r#"<g stroke="black" fill="none"><line x1="{LEFT}" y1="{y0}" x2="{x1}" y2="{y0}"/><line x1="{LEFT}" y1="{TOP}" x2="{LEFT}" y2="{y0}"/></g>"#,
        y0 = TOP + plot_h,
        x1 = LEFT + plot_w,
    );
    let mut tick = x_min.ceil();
    while tick <= x_max + 1e-9 {
        let x = sx(tick.exp2());
        let _ = writeln!(
            svg,
            r#"<line x1="{x:.2}" y1="{y0}" x2="{x:.2}" y2="{y1}" stroke="black"/><text x="{x:.2}" y="{yt}" text-anchor="middle">{n}</text>"#,
            y0 = TOP + plot_h,
            y1 = TOP + plot_h + 5.0,
            yt = TOP + plot_h + 18.0,
            n = tick.exp2(),
        );
        tick += 1.0;
    }
    for k in 0..=5 {
        let v = y_max * k as f64 / 5.0;
        let y = sy(v);
        let _ = writeln!(
            svg,
            r#"<line x1="{x0}" y1="{y:.2}" x2="{LEFT}" y2="{y:.2}" stroke="black"/><text x="{xt}" y="{yb:.2}" text-anchor="end">{v:.3}</text>"#,
            x0 = LEFT - 5.0,
            xt = LEFT - 8.0,
            yb = y + 4.0,
        );
    }
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="{}" text-anchor="middle">n (leaves, log scale)</text>"#,
        LEFT + plot_w / 2.0,
        HEIGHT - 10.0
    );
    let _ = writeln!(
        svg,
        r#"<text transform="translate(16 {}) rotate(-90)" text-anchor="middle">{}</text>"#,
        TOP + plot_h / 2.0,
        escape(y_label)
    );
    for (i, s) in series.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let coords: Vec<String> = s.points.iter().map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y))).collect();
        let _ = writeln!(
            svg,
            r#"<polyline fill="none" stroke="{color}" stroke-width="2" points="{}"><title>{}</title></polyline>"#,
            coords.join(" "),
            escape(&s.label)
        );
        let ly = TOP + 10.0 + 18.0 * i as f64;
        let lx = LEFT + plot_w + 12.0;
        let _ = writeln!(
            svg,
            r#"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="2"/><text x="{}" y="{}">{}</text>"#,
            lx + 20.0,
            lx + 26.0,
            ly + 4.0,
            escape(&s.label)
        );
    }
    svg.push_str("</svg>\n");
    svg
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// Series of `value` per scheme (and per `N` when several are present).
pub fn summary_series(summary: &[SummaryRow], value: impl Fn(&SummaryRow) -> f64) -> Vec<Series> {
    let mut particle_counts: Vec<usize> = summary.iter().map(|r| r.particles).collect();
    particle_counts.sort_unstable();
    particle_counts.dedup();
    let mut series: Vec<Series> = Vec::new();
    for row in summary {
        let label = if particle_counts.len() > 1 {
            format!("{} N={}", row.scheme, row.particles)
        } else {
            row.scheme.clone()
        };
        let v = value(row);
        let idx = match series.iter().position(|s| s.label == label) {
            Some(i) => i,
            None => {
                series.push(Series {
                    label,
                    points: Vec::new(),
                });
                series.len() - 1
            }
        };
        if v.is_finite() {
            series[idx].points.push((row.n as f64, v));
        }
    }
    for s in &mut series {
        s.points.sort_by(|a, b| a.0.total_cmp(&b.0));
    }
    series
}

/// Writes `heights_mean.svg` and `heights_var.svg` (rescaled heights, in
/// coalescent units) into `dir`.
pub fn emit_plots(summary: &[SummaryRow], dir: &Path) -> Result<[PathBuf; 2]> {
    if summary.is_empty() {
        return Err(HarnessError::Config("cannot plot an empty summary".into()));
    }
    let mean = render_svg(
        "Mean tree height",
        "mean height (coalescent units)",
        &summary_series(summary, |r| r.mean_rescaled),
    );
    let var = render_svg(
        "Variance of tree height",
        "height variance (coalescent units^2)",
        &summary_series(summary, |r| r.var_rescaled),
    );
    let paths = [dir.join("heights_mean.svg"), dir.join("heights_var.svg")];
    for (path, text) in paths.iter().zip([mean, var]) {
        std::fs::write(path, text).map_err(|e| HarnessError::io(path, e))?;
    }
    Ok(paths)
}
