//! Self-contained SVG line charts of age curves.

use std::fmt::Write as _;

use crate::models::AgeCurve;

const PALETTE: [&str; 10] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf",
];

#[derive(Debug, Clone, PartialEq)]
pub struct ChartOptions {
    pub width: f64,
    pub height: f64,
    pub title: String,
    /// Fit the y-axis to the data instead of the fixed 0–10 scale.
    pub autoscale: bool,
}

impl Default for ChartOptions {
    fn default() -> Self {
        ChartOptions {
            width: 720.0,
            height: 440.0,
            title: "Adjusted happiness by age".into(),
            autoscale: false,
        }
    }
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

fn y_range(curves: &[AgeCurve], autoscale: bool) -> (f64, f64) {
    if !autoscale {
        return (0.0, 10.0);
    }
    let levels = curves.iter().flat_map(|c| c.points.iter().map(|p| p.level));
    let (lo, hi) = levels.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    if !lo.is_finite() {
        return (0.0, 10.0);
    }
    let pad = ((hi - lo) * 0.1).max(0.05);
    ((lo - pad).floor_to(0.1), (hi + pad).ceil_to(0.1))
}

trait Snap {
    fn floor_to(self, step: f64) -> f64;
    fn ceil_to(self, step: f64) -> f64;
}

impl Snap for f64 {
    fn floor_to(self, step: f64) -> f64 {
        (self / step).floor() * step
    }
    fn ceil_to(self, step: f64) -> f64 {
        (self / step).ceil() * step
    }
}

/// One polyline per curve at bin midpoints, with a legend.
pub fn line_chart(curves: &[AgeCurve], options: &ChartOptions) -> String {
    let (w, h) = (options.width, options.height);
    let (left, right, top, bottom) = (56.0, 160.0, 40.0, 48.0);
    let plot_w = w - left - right;
    let plot_h = h - top - bottom;
    let (y0, y1) = y_range(curves, options.autoscale);
    let (x0, x1) = (10.0, 95.0);
    let sx = |x: f64| left + (x - x0) / (x1 - x0) * plot_w;
    let sy = |y: f64| top + (1.0 - (y - y0) / (y1 - y0)) * plot_h;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="20" text-anchor="middle" font-size="14">{}</text>"#,
        left + plot_w / 2.0,
        escape(&options.title)
    );
    let _ = writeln!(
        s,
        r#"<rect x="{left}" y="{top}" width="{plot_w}" height="{plot_h}" fill="none" stroke="black"/>"#
    );
    for k in 0..=5 {
        let v = y0 + (y1 - y0) * k as f64 / 5.0;
        let y = sy(v);
        let _ = writeln!(
            s,
            r##"<line x1="{left}" y1="{y:.2}" x2="{}" y2="{y:.2}" stroke="#dddddd"/><text x="{}" y="{:.2}" text-anchor="end">{v:.1}</text>"##,
            left + plot_w,
            left - 6.0,
            y + 4.0
        );
    }
    for age in (20..=90).step_by(10) {
        let x = sx(age as f64);
        let _ = writeln!(
            s,
            r#"<text x="{x:.2}" y="{}" text-anchor="middle">{age}</text>"#,
            top + plot_h + 16.0
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle">age</text>"#,
        left + plot_w / 2.0,
        h - 10.0
    );
    for (i, c) in curves.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let points = c
            .points
            .iter()
            .map(|p| format!("{:.2},{:.2}", sx(p.midpoint), sy(p.level)))
            .collect::<Vec<_>>()
            .join(" ");
        let _ = writeln!(
            s,
            r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{points}"><title>{}</title></polyline>"#,
            escape(&c.country)
        );
    }
    let _ = writeln!(s, r#"<g class="legend">"#);
    for (i, c) in curves.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let y = top + 8.0 + 14.0 * i as f64;
        let x = left + plot_w + 12.0;
        let _ = writeln!(
            s,
            r#"<line x1="{x}" y1="{y}" x2="{}" y2="{y}" stroke="{color}" stroke-width="2"/><text x="{}" y="{}">{}</text>"#,
            x + 18.0,
            x + 24.0,
            y + 4.0,
            escape(&c.country)
        );
    }
    s.push_str("</g>\n</svg>\n");
    s
}
