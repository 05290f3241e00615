//! Convergence plots as standalone SVG: mean best-so-far against evaluations,
//! one polyline per method.
//!
//! The plot-area group carries its data range as `data-*` attributes so the
//! drawn coordinates can be mapped back to data values.

use std::fmt::Write as _;
use std::path::Path;

use crate::bench::traces::AggregateRow;
use crate::error::{Error, Result};

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 440.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 180.0;
const TOP: f64 = 30.0;
const BOTTOM: f64 = 60.0;
const PALETTE: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf"];

/// Linear map from data to pixels on both axes (the y data is `log10` values on a log axis).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Frame {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
    pub log_y: bool,
    pub left: f64,
    pub top: f64,
    pub width: f64,
    pub height: f64,
}

impl Frame {
    fn y_data(&self, y: f64) -> f64 {
        if self.log_y { y.log10() } else { y }
    }

    pub fn to_px(&self, x: f64, y: f64) -> (f64, f64) {
        let px = self.left + (x - self.x_min) / (self.x_max - self.x_min) * self.width;
        let py = self.top + (self.y_max - self.y_data(y)) / (self.y_max - self.y_min) * self.height;
        (px, py)
    }

    pub fn from_px(&self, px: f64, py: f64) -> (f64, f64) {
        let x = self.x_min + (px - self.left) / self.width * (self.x_max - self.x_min);
        let y = self.y_max - (py - self.top) / self.height * (self.y_max - self.y_min);
        (x, if self.log_y { 10f64.powf(y) } else { y })
    }
}

fn padded(lo: f64, hi: f64) -> (f64, f64) {
    if hi > lo {
        let pad = 0.05 * (hi - lo);
        (lo - pad, hi + pad)
    } else {
        let pad = if lo == 0.0 { 1.0 } else { 0.1 * lo.abs() };
        (lo - pad, hi + pad)
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// Renders the SVG text for labelled aggregate series.
pub fn render_convergence_svg(series: &[(String, Vec<AggregateRow>)], log_y: bool) -> Result<String> {
    if series.is_empty() || series.iter().all(|(_, rows)| rows.is_empty()) {
        return Err(Error::Config("nothing to plot: no aggregate rows".into()));
    }
    let rows = || series.iter().flat_map(|(_, r)| r.iter());
    if rows().any(|r| !r.mean.is_finite()) {
        return Err(Error::Config("aggregate means must be finite".into()));
    }
    if log_y && rows().any(|r| r.mean <= 0.0) {
        return Err(Error::Config("log-scale plot needs positive means".into()));
    }
    let ys = rows().map(|r| if log_y { r.mean.log10() } else { r.mean });
    let (y_lo, y_hi) = ys.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), y| (a.min(y), b.max(y)));
    let x_lo = rows().map(|r| r.eval_index).min().unwrap_or(1) as f64;
    let x_hi = rows().map(|r| r.eval_index).max().unwrap_or(1) as f64;
    let (x_min, x_max) = if x_hi > x_lo { (x_lo, x_hi) } else { (x_lo - 1.0, x_hi + 1.0) };
    let (y_min, y_max) = padded(y_lo, y_hi);
    let frame = Frame {
        x_min,
        x_max,
        y_min,
        y_max,
        log_y,
        left: LEFT,
        top: TOP,
        width: WIDTH - LEFT - RIGHT,
        height: HEIGHT - TOP - BOTTOM,
    };

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<g class="plot-area" data-x-min="{}" data-x-max="{}" data-y-min="{}" data-y-max="{}" data-log-y="{}" data-left="{}" data-top="{}" data-width="{}" data-height="{}">"#,
        frame.x_min, frame.x_max, frame.y_min, frame.y_max, frame.log_y, frame.left, frame.top, frame.width, frame.height
    );
    let _ = writeln!(
        s,
        r#"<rect x="{}" y="{}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        frame.left, frame.top, frame.width, frame.height
    );

    for k in 0..=5 {
        let t = k as f64 / 5.0;
        let xv = x_min + t * (x_max - x_min);
        let (px, _) = frame.to_px(xv, if log_y { 10f64.powf(y_min) } else { y_min });
        let base = frame.top + frame.height;
        let _ = writeln!(s, r#"<line x1="{px}" y1="{base}" x2="{px}" y2="{}" stroke="black"/>"#, base + 5.0);
        let _ = writeln!(s, r#"<text x="{px}" y="{}" text-anchor="middle">{:.0}</text>"#, base + 20.0, xv);
        let yd = y_min + t * (y_max - y_min);
        let py = frame.top + (1.0 - t) * frame.height;
        let label = if log_y { format!("{:.3e}", 10f64.powf(yd)) } else { format!("{yd:.3}") };
        let _ = writeln!(s, r#"<line x1="{}" y1="{py}" x2="{}" y2="{py}" stroke="black"/>"#, frame.left - 5.0, frame.left);
        let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="end">{label}</text>"#, frame.left - 8.0, py + 4.0);
    }

    for (i, (_, rows)) in series.iter().enumerate() {
        if rows.is_empty() {
            continue;
        }
        let pts: Vec<String> = rows
            .iter()
            .map(|r| {
                let (px, py) = frame.to_px(r.eval_index as f64, r.mean);
                format!("{px},{py}")
            })
            .collect();
        let _ = writeln!(
            s,
            r#"<polyline fill="none" stroke="{}" stroke-width="1.5" points="{}"/>"#,
            PALETTE[i % PALETTE.len()],
            pts.join(" ")
        );
    }
    let _ = writeln!(s, "</g>");

    let lx = WIDTH - RIGHT + 15.0;
    for (i, (label, _)) in series.iter().enumerate() {
        let ly = TOP + 15.0 + 20.0 * i as f64;
        let _ = writeln!(
            s,
            r#"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{}" stroke-width="2"/>"#,
            lx + 20.0,
            PALETTE[i % PALETTE.len()]
        );
        let _ = writeln!(s, r#"<text x="{}" y="{}">{}</text>"#, lx + 26.0, ly + 4.0, escape(label));
    }
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle">evaluations</text>"#,
        frame.left + frame.width / 2.0,
        HEIGHT - 15.0
    );
    let _ = writeln!(
        s,
        r#"<text x="18" y="{}" text-anchor="middle" transform="rotate(-90 18 {})">mean best f{}</text>"#,
        frame.top + frame.height / 2.0,
        frame.top + frame.height / 2.0,
        if log_y { " (log)" } else { "" }
    );
    s.push_str("</svg>\n");
    Ok(s)
}

/// Writes the convergence plot of labelled aggregate series to `path`.
pub fn emit_convergence_plot(inputs: &[(String, Vec<AggregateRow>)], path: &Path, log_y: bool) -> Result<()> {
    let svg = render_convergence_svg(inputs, log_y)?;
    std::fs::write(path, svg)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(t: usize, mean: f64) -> AggregateRow {
        AggregateRow { eval_index: t, n: 1, mean, median: mean, q25: mean, q75: mean }
    }

    #[test]
    fn frame_roundtrip() {
        for log_y in [false, true] {
            let f = Frame { x_min: 1.0, x_max: 9.0, y_min: -1.0, y_max: 2.0, log_y, left: 5.0, top: 7.0, width: 300.0, height: 200.0 };
            let (px, py) = f.to_px(4.0, 3.0);
            let (x, y) = f.from_px(px, py);
            assert!((x - 4.0).abs() < 1e-12 && (y - 3.0).abs() < 1e-12);
        }
    }

    #[test]
    fn empty_and_invalid_input() {
        assert!(render_convergence_svg(&[], false).is_err());
        assert!(render_convergence_svg(&[("a".into(), vec![])], false).is_err());
        assert!(render_convergence_svg(&[("a".into(), vec![row(1, 0.0)])], true).is_err());
    }

    #[test]
    fn escapes_labels() {
        let svg = render_convergence_svg(&[("a<b".into(), vec![row(1, 1.0)])], false).unwrap();
        assert!(svg.contains("a&lt;b"));
    }
}
