// Copyright 2026 cavfb contributors
// SPDX-License-Identifier: Apache-2.0

//! Minimal static SVG charts: line plots, histograms and the
//! single-trajectory figure.

use std::fmt::Write;

use crate::dynamics::TrajectoryRecord;
use crate::stats::Histogram;

const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#7f7f7f"];
const PANEL_W: f64 = 520.0;
const PANEL_H: f64 = 220.0;
const MARGIN_L: f64 = 64.0;
const MARGIN_R: f64 = 16.0;
const MARGIN_T: f64 = 28.0;
const MARGIN_B: f64 = 40.0;

#[derive(Debug, Clone)]
pub struct Series {
    pub label: String,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

impl Series {
    pub fn new(label: impl Into<String>, x: Vec<f64>, y: Vec<f64>) -> Self {
        Self { label: label.into(), x, y }
    }
}

#[derive(Debug, Clone)]
pub struct LinePlot {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub series: Vec<Series>,
    /// Draw points instead of joined lines.
    pub scatter: bool,
}

impl LinePlot {
    pub fn new(title: impl Into<String>, x_label: impl Into<String>, y_label: impl Into<String>) -> Self {
        Self { title: title.into(), x_label: x_label.into(), y_label: y_label.into(), series: Vec::new(), scatter: false }
    }

    pub fn with(mut self, s: Series) -> Self {
        self.series.push(s);
        self
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn extent(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values.filter(|v| v.is_finite()).fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    if hi - lo <= f64::EPSILON * lo.abs().max(1.0) {
        let pad = lo.abs().max(1.0) * 0.5;
        return (lo - pad, hi + pad);
    }
    let pad = 0.05 * (hi - lo);
    (lo - pad, hi + pad)
}

/// Tick positions at 1, 2 or 5 times a power of ten.
fn ticks(lo: f64, hi: f64) -> Vec<f64> {
    let raw = (hi - lo) / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0].iter().map(|m| m * mag).find(|s| *s >= raw).unwrap_or(10.0 * mag);
    let mut t = (lo / step).ceil() * step;
    let mut out = Vec::new();
    while t <= hi + 1e-9 * step {
        out.push(if t.abs() < 1e-12 * step { 0.0 } else { t });
        t += step;
    }
    out
}

fn fmt_tick(v: f64) -> String {
    let a = v.abs();
    if a != 0.0 && !(1e-3..1e5).contains(&a) {
        format!("{v:.1e}")
    } else {
        format!("{}", (v * 1e6).round() / 1e6)
    }
}

struct Frame {
    ox: f64,
    oy: f64,
    x: (f64, f64),
    y: (f64, f64),
    log_x: bool,
}

impl Frame {
    fn px(&self, v: f64) -> f64 {
        let (lo, hi, v) = if self.log_x { (self.x.0.ln(), self.x.1.ln(), v.ln()) } else { (self.x.0, self.x.1, v) };
        self.ox + MARGIN_L + (v - lo) / (hi - lo) * (PANEL_W - MARGIN_L - MARGIN_R)
    }

    fn py(&self, v: f64) -> f64 {
        self.oy + PANEL_H - MARGIN_B - (v - self.y.0) / (self.y.1 - self.y.0) * (PANEL_H - MARGIN_T - MARGIN_B)
    }

    fn axes(&self, out: &mut String, title: &str, xl: &str, yl: &str, xticks: &[f64]) {
        let (x0, x1) = (self.ox + MARGIN_L, self.ox + PANEL_W - MARGIN_R);
        let (y0, y1) = (self.oy + PANEL_H - MARGIN_B, self.oy + MARGIN_T);
        let _ = writeln!(out, r#"<rect x="{x0:.1}" y="{y1:.1}" width="{:.1}" height="{:.1}" fill="none" stroke="dimgray"/>"#, x1 - x0, y0 - y1);
        for &t in xticks {
            let x = self.px(t);
            let _ = writeln!(out, r#"<line x1="{x:.1}" y1="{y0:.1}" x2="{x:.1}" y2="{:.1}" stroke="dimgray"/>"#, y0 + 4.0);
            let _ = writeln!(out, r#"<text x="{x:.1}" y="{:.1}" text-anchor="middle">{}</text>"#, y0 + 16.0, fmt_tick(t));
        }
        for t in ticks(self.y.0, self.y.1) {
            let y = self.py(t);
            let _ = writeln!(out, r#"<line x1="{:.1}" y1="{y:.1}" x2="{x0:.1}" y2="{y:.1}" stroke="dimgray"/>"#, x0 - 4.0);
            let _ = writeln!(out, r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{}</text>"#, x0 - 6.0, y + 4.0, fmt_tick(t));
        }
        let _ = writeln!(out, r#"<text x="{:.1}" y="{:.1}" text-anchor="middle" font-weight="bold">{}</text>"#, (x0 + x1) / 2.0, self.oy + 18.0, escape(title));
        let _ = writeln!(out, r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#, (x0 + x1) / 2.0, y0 + 32.0, escape(xl));
        let (lx, ly) = (self.ox + 14.0, (y0 + y1) / 2.0);
        let _ = writeln!(out, r#"<text x="{lx:.1}" y="{ly:.1}" text-anchor="middle" transform="rotate(-90 {lx:.1} {ly:.1})">{}</text>"#, escape(yl));
    }
}

fn render_line(out: &mut String, plot: &LinePlot, ox: f64, oy: f64) {
    let frame = Frame {
        ox,
        oy,
        x: extent(plot.series.iter().flat_map(|s| s.x.iter().copied())),
        y: extent(plot.series.iter().flat_map(|s| s.y.iter().copied())),
        log_x: false,
    };
    frame.axes(out, &plot.title, &plot.x_label, &plot.y_label, &ticks(frame.x.0, frame.x.1));
    for (k, s) in plot.series.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        let pts = s.x.iter().zip(&s.y).filter(|(x, y)| x.is_finite() && y.is_finite());
        if plot.scatter {
            for (x, y) in pts {
                let _ = writeln!(out, r#"<circle cx="{:.1}" cy="{:.1}" r="2" fill="{color}"/>"#, frame.px(*x), frame.py(*y));
            }
        } else {
            let mut d = String::new();
            for (i, (x, y)) in pts.enumerate() {
                let _ = write!(d, "{}{:.1},{:.1}", if i == 0 { "M" } else { " L" }, frame.px(*x), frame.py(*y));
            }
            let _ = writeln!(out, r#"<path d="{d}" fill="none" stroke="{color}" stroke-width="1"/>"#);
        }
        let ly = oy + MARGIN_T + 14.0 + 14.0 * k as f64;
        let lx = ox + PANEL_W - MARGIN_R - 8.0;
        let _ = writeln!(out, r#"<text x="{lx:.1}" y="{ly:.1}" text-anchor="end" fill="{color}">{}</text>"#, escape(&s.label));
    }
}

fn render_histogram(out: &mut String, title: &str, x_label: &str, hist: &Histogram, log_x: bool, ox: f64, oy: f64) {
    let ymax = hist.counts.iter().copied().max().unwrap_or(0).max(1) as f64;
    let frame = Frame { ox, oy, x: (hist.edges[0], hist.edges[hist.edges.len() - 1]), y: (0.0, 1.05 * ymax), log_x };
    let xt: Vec<f64> = if log_x {
        let (a, b) = (frame.x.0.log10().ceil() as i32, frame.x.1.log10().floor() as i32);
        (a..=b).map(|e| 10f64.powi(e)).collect()
    } else {
        ticks(frame.x.0, frame.x.1)
    };
    frame.axes(out, title, x_label, "count", &xt);
    for (i, &c) in hist.counts.iter().enumerate() {
        if c == 0 {
            continue;
        }
        let (x0, x1) = (frame.px(hist.edges[i]), frame.px(hist.edges[i + 1]));
        let (y0, y1) = (frame.py(0.0), frame.py(c as f64));
        let _ = writeln!(out, r#"<rect x="{x0:.1}" y="{y1:.1}" width="{:.1}" height="{:.1}" fill="{}" stroke="white"/>"#, x1 - x0, y0 - y1, PALETTE[0]);
    }
}

fn document(cols: usize, rows: usize, body: &str) -> String {
    let (w, h) = (PANEL_W * cols as f64, PANEL_H * rows as f64);
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\" font-family=\"sans-serif\" font-size=\"11\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n{body}</svg>\n"
    )
}

/// Single-panel line or scatter plot.
pub fn line_plot(plot: &LinePlot) -> String {
    let mut body = String::new();
    render_line(&mut body, plot, 0.0, 0.0);
    document(1, 1, &body)
}

/// Single-panel histogram; `log_x` for log-spaced edges.
pub fn histogram(title: &str, x_label: &str, hist: &Histogram, log_x: bool) -> String {
    let mut body = String::new();
    render_histogram(&mut body, title, x_label, hist, log_x, 0.0, 0.0);
    document(1, 1, &body)
}

/// Several histograms stacked vertically.
pub fn histograms(panels: &[(&str, &str, &Histogram, bool)]) -> String {
    let mut body = String::new();
    for (i, (title, xl, h, log_x)) in panels.iter().enumerate() {
        render_histogram(&mut body, title, xl, h, *log_x, 0.0, i as f64 * PANEL_H);
    }
    document(1, panels.len().max(1), &body)
}

/// Transmission, radius, radial velocity and the transverse path of one
/// trajectory, with the estimates overlaid on the truth.
pub fn trajectory_figure(record: &TrajectoryRecord) -> String {
    let t: Vec<f64> = record.samples.iter().map(|s| s.t_s * 1e6).collect();
    let col = |f: fn(&crate::dynamics::Sample) -> f64| -> Vec<f64> { record.samples.iter().map(f).collect() };
    let panels = [
        LinePlot::new("Transmission", "t (µs)", "T")
            .with(Series::new("noisy", t.clone(), col(|s| s.noisy_transmission)))
            .with(Series::new("noiseless", t.clone(), col(|s| s.transmission))),
        LinePlot::new("Radius", "t (µs)", "ρ (µm)")
            .with(Series::new("ρ_est", t.clone(), col(|s| s.rho_est_m * 1e6)))
            .with(Series::new("ρ", t.clone(), col(|s| s.rho_m * 1e6))),
        LinePlot::new("Radial velocity", "t (µs)", "dρ/dt (µm/µs)")
            .with(Series::new("ρ̇_est", t.clone(), col(|s| s.rho_dot_est_m_s)))
            .with(Series::new("ρ̇", t.clone(), col(|s| s.rho_dot_m_s))),
        LinePlot::new("Drive level", "t (µs)", "level index").with(Series::new("level", t.clone(), col(|s| s.level.index() as f64))),
    ];
    let path = LinePlot::new("Transverse path", "y (µm)", "z (µm)").with(Series::new("path", col(|s| s.y_m * 1e6), col(|s| s.z_m * 1e6)));
    let mut body = String::new();
    for (i, p) in panels.iter().enumerate() {
        render_line(&mut body, p, 0.0, i as f64 * PANEL_H);
    }
    render_line(&mut body, &path, PANEL_W, 0.0);
    document(2, panels.len(), &body)
}
