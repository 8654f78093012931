//! Trajectory overlays as standalone SVG.

use crate::error::{Error, Result};

/// Stroke colours, assigned in order.
pub const PALETTE: [&str; 8] = ["#000000", "#d62728", "#1f77b4", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2"];

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledPath {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

impl LabeledPath {
    pub fn new(label: impl Into<String>, points: Vec<(f64, f64)>) -> Self {
        Self { label: label.into(), points }
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// One polyline per path plus a legend. North is up.
pub fn render_svg(paths: &[LabeledPath]) -> Result<String> {
    if paths.is_empty() {
        return Err(Error::EmptyInput("nothing to plot"));
    }
    let all = paths.iter().flat_map(|p| p.points.iter());
    let (mut x0, mut y0, mut x1, mut y1) = (f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
    for &(x, y) in all {
        if !(x.is_finite() && y.is_finite()) {
            return Err(Error::config("plot points must be finite"));
        }
        x0 = x0.min(x);
        y0 = y0.min(y);
        x1 = x1.max(x);
        y1 = y1.max(y);
    }
    if !x0.is_finite() {
        return Err(Error::EmptyInput("paths have no points"));
    }
    let size = 480.0;
    let margin = 20.0;
    let span = (x1 - x0).max(y1 - y0).max(1e-9);
    let scale = (size - 2.0 * margin) / span;
    let px = |x: f64| margin + (x - x0) * scale;
    let py = |y: f64| size - margin - (y - y0) * scale;
    let legend_h = 18.0 * paths.len() as f64 + 10.0;

    let mut out = String::new();
    out.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\">\n",
        w = size,
        h = size + legend_h
    ));
    out.push_str(&format!("<rect width=\"{size}\" height=\"{}\" fill=\"white\"/>\n", size + legend_h));
    for (i, p) in paths.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let pts: Vec<String> = p.points.iter().map(|&(x, y)| format!("{:.2},{:.2}", px(x), py(y))).collect();
        out.push_str(&format!(
            "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"2\" points=\"{}\"><title>{}</title></polyline>\n",
            pts.join(" "),
            escape(&p.label)
        ));
        let ly = size + 16.0 + 18.0 * i as f64;
        out.push_str(&format!(
            "<line x1=\"{m}\" y1=\"{ly}\" x2=\"{e}\" y2=\"{ly}\" stroke=\"{color}\" stroke-width=\"2\"/>\n",
            m = margin,
            e = margin + 24.0
        ));
        out.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"12\">{}</text>\n",
            margin + 30.0,
            ly + 4.0,
            escape(&p.label)
        ));
    }
    out.push_str("</svg>\n");
    Ok(out)
}
