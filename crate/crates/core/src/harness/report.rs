use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use super::eval::ScoredPrediction;
use crate::error::{Error, Result};
use crate::fsio::write_atomic;
use crate::metrics::{polyfit4, polyval, MetricsReport};

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 480.0;
const MARGIN: f64 = 56.0;
const CURVE_STEPS: usize = 64;
const PALETTE: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf", "#8c564b", "#e377c2"];

/// Predictions of one run, as plotted.
#[derive(Debug, Clone)]
pub struct RunSeries {
    pub name: String,
    pub predictions: Vec<ScoredPrediction>,
    pub report: MetricsReport,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportFiles {
    pub scatter_csv: PathBuf,
    pub plot_svg: PathBuf,
    pub summary_csv: PathBuf,
}

struct Frame {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
}

impl Frame {
    fn px(&self, x: f64) -> f64 {
        MARGIN + (x - self.x0) / (self.x1 - self.x0) * (WIDTH - 2.0 * MARGIN)
    }

    fn py(&self, y: f64) -> f64 {
        HEIGHT - MARGIN - (y - self.y0) / (self.y1 - self.y0) * (HEIGHT - 2.0 * MARGIN)
    }
}

fn padded(lo: f64, hi: f64) -> (f64, f64) {
    let pad = if hi > lo { 0.05 * (hi - lo) } else { 0.5 };
    (lo - pad, hi + pad)
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// Scatter of prediction (x) against MOS (y) for every run, each with its
/// quartic least-squares curve. Runs whose predictions cannot support a
/// quartic (fewer than five distinct values) are drawn without a curve.
fn render_svg(runs: &[RunSeries]) -> String {
    let all = runs.iter().flat_map(|r| &r.predictions);
    let (mut xmin, mut xmax, mut ymin, mut ymax) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for p in all {
        xmin = xmin.min(p.y_hat);
        xmax = xmax.max(p.y_hat);
        ymin = ymin.min(p.y);
        ymax = ymax.max(p.y);
    }
    let (x0, x1) = padded(xmin, xmax);
    let (y0, y1) = padded(ymin, ymax);
    let f = Frame { x0, x1, y0, y1 };

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let (left, right, top, bottom) = (MARGIN, WIDTH - MARGIN, MARGIN, HEIGHT - MARGIN);
    let _ = writeln!(
        s,
        r#"<path d="M{left} {top} V{bottom} H{right}" fill="none" stroke="black"/>"#
    );
    for i in 0..=4 {
        let t = i as f64 / 4.0;
        let (xv, yv) = (x0 + t * (x1 - x0), y0 + t * (y1 - y0));
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{xv:.2}</text>"#,
            f.px(xv),
            bottom + 16.0
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{yv:.2}</text>"#,
            left - 6.0,
            f.py(yv) + 4.0
        );
    }
    let _ = writeln!(s, r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">prediction</text>"#, WIDTH / 2.0, HEIGHT - 12.0);
    let _ = writeln!(
        s,
        r#"<text x="14" y="{:.1}" text-anchor="middle" transform="rotate(-90 14 {:.1})">MOS</text>"#,
        HEIGHT / 2.0,
        HEIGHT / 2.0
    );

    for (k, run) in runs.iter().enumerate() {
        let colour = PALETTE[k % PALETTE.len()];
        let _ = writeln!(s, r#"<g class="run" data-name="{}">"#, escape(&run.name));
        for p in &run.predictions {
            let _ = writeln!(
                s,
                r#"<circle cx="{:.2}" cy="{:.2}" r="2.5" fill="{colour}" fill-opacity="0.6"/>"#,
                f.px(p.y_hat),
                f.py(p.y)
            );
        }
        let xs: Vec<f64> = run.predictions.iter().map(|p| p.y_hat).collect();
        let ys: Vec<f64> = run.predictions.iter().map(|p| p.y).collect();
        if let Ok(c) = polyfit4(&xs, &ys) {
            let lo = xs.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let mut d = String::new();
            for i in 0..=CURVE_STEPS {
                let x = lo + (hi - lo) * i as f64 / CURVE_STEPS as f64;
                let y = polyval(&c, x).clamp(y0, y1);
                let _ = write!(d, "{}{:.2} {:.2}", if i == 0 { "M" } else { " L" }, f.px(x), f.py(y));
            }
            let _ = writeln!(s, r#"<path class="fit" d="{d}" fill="none" stroke="{colour}" stroke-width="2"/>"#);
        }
        let ly = top + 4.0 + 18.0 * k as f64;
        let _ = writeln!(s, r#"<rect x="{:.1}" y="{:.1}" width="10" height="10" fill="{colour}"/>"#, left + 10.0, ly);
        let _ = writeln!(
            s,
            r#"<text class="legend" x="{:.1}" y="{:.1}">{} (SRCC={:.3}, PLCC={:.3})</text>"#,
            left + 26.0,
            ly + 9.0,
            escape(&run.name),
            run.report.srcc,
            run.report.plcc
        );
        let _ = writeln!(s, "</g>");
    }
    s.push_str("</svg>\n");
    s
}

fn scatter_csv(runs: &[RunSeries]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["run", "id", "y_hat", "y"])?;
    for r in runs {
        for p in &r.predictions {
            w.write_record([r.name.as_str(), p.id.as_str(), &p.y_hat.to_string(), &p.y.to_string()])?;
        }
    }
    Ok(String::from_utf8(w.into_inner().map_err(|e| e.into_error())?).expect("utf-8"))
}

fn summary_csv(runs: &[RunSeries]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["run", "n", "srcc", "plcc", "mse"])?;
    for r in runs {
        let m = &r.report;
        w.write_record([r.name.clone(), m.n.to_string(), m.srcc.to_string(), m.plcc.to_string(), m.mse.to_string()])?;
    }
    Ok(String::from_utf8(w.into_inner().map_err(|e| e.into_error())?).expect("utf-8"))
}

/// Writes `scatter.csv`, `scatter.svg` and `summary.csv` under `dir`. The
/// output depends only on the runs, so re-emitting gives identical files.
pub fn emit_report(runs: &[RunSeries], dir: &Path) -> Result<ReportFiles> {
    if runs.is_empty() || runs.iter().any(|r| r.predictions.is_empty()) {
        return Err(Error::Empty("report runs"));
    }
    let files = ReportFiles {
        scatter_csv: dir.join("scatter.csv"),
        plot_svg: dir.join("scatter.svg"),
        summary_csv: dir.join("summary.csv"),
    };
    write_atomic(&files.scatter_csv, scatter_csv(runs)?.as_bytes())?;
    write_atomic(&files.plot_svg, render_svg(runs).as_bytes())?;
    write_atomic(&files.summary_csv, summary_csv(runs)?.as_bytes())?;
    Ok(files)
}
