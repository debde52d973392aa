//! Minimal SVG line charts and heatmaps.

use std::fmt::Write as _;

const PALETTE: [&str; 8] = ["#d62728", "#2ca02c", "#1f77b4", "#000000", "#9467bd", "#ff7f0e", "#8c564b", "#17becf"];
const DASHES: [&str; 4] = ["", "6,3", "2,3", "6,3,2,3"];

const WIDTH: f64 = 640.0;
const PANEL_HEIGHT: f64 = 300.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 150.0;
const TOP: f64 = 30.0;
const BOTTOM: f64 = 45.0;

#[derive(Debug, Clone)]
pub struct Series {
    pub label: String,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct Panel {
    pub title: String,
    pub y_label: String,
    pub series: Vec<Series>,
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn tick(v: f64) -> String {
    let s = format!("{v:.3}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" { "0".into() } else { s.into() }
}

fn range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values.filter(|v| v.is_finite()).fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    let lo = lo.min(0.0);
    if hi - lo < 1e-12 { (lo, lo + 1.0) } else { (lo, hi + 0.05 * (hi - lo)) }
}

/// Stacked line-chart panels sharing the x axis label.
pub fn line_chart(x_label: &str, panels: &[Panel]) -> String {
    let height = PANEL_HEIGHT * panels.len().max(1) as f64;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{height}" viewBox="0 0 {WIDTH} {height}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    for (pi, panel) in panels.iter().enumerate() {
        let y0 = pi as f64 * PANEL_HEIGHT;
        let (pw, ph) = (WIDTH - LEFT - RIGHT, PANEL_HEIGHT - TOP - BOTTOM);
        let (xmin, xmax) = range(panel.series.iter().flat_map(|r| r.x.iter().copied()));
        let (ymin, ymax) = range(panel.series.iter().flat_map(|r| r.y.iter().copied()));
        let sx = |x: f64| LEFT + (x - xmin) / (xmax - xmin) * pw;
        let sy = |y: f64| y0 + TOP + ph - (y - ymin) / (ymax - ymin) * ph;
        let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle" font-size="14">{}</text>"#, LEFT + pw / 2.0, y0 + 18.0, escape(&panel.title));
        let _ = writeln!(s, r#"<rect x="{LEFT}" y="{}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#, y0 + TOP);
        for i in 0..=5 {
            let f = i as f64 / 5.0;
            let (xv, yv) = (xmin + f * (xmax - xmin), ymin + f * (ymax - ymin));
            let (px, py) = (sx(xv), sy(yv));
            let _ = writeln!(s, r#"<line x1="{px:.2}" y1="{}" x2="{px:.2}" y2="{}" stroke="black"/>"#, y0 + TOP + ph, y0 + TOP + ph + 4.0);
            let _ = writeln!(s, r#"<text x="{px:.2}" y="{}" text-anchor="middle">{}</text>"#, y0 + TOP + ph + 17.0, tick(xv));
            let _ = writeln!(s, r#"<line x1="{}" y1="{py:.2}" x2="{LEFT}" y2="{py:.2}" stroke="black"/>"#, LEFT - 4.0);
            let _ = writeln!(s, r#"<text x="{}" y="{:.2}" text-anchor="end">{}</text>"#, LEFT - 7.0, py + 4.0, tick(yv));
        }
        let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, LEFT + pw / 2.0, y0 + PANEL_HEIGHT - 8.0, escape(x_label));
        let (lx, ly) = (18.0, y0 + TOP + ph / 2.0);
        let _ = writeln!(s, r#"<text x="{lx}" y="{ly}" text-anchor="middle" transform="rotate(-90 {lx} {ly})">{}</text>"#, escape(&panel.y_label));
        for (k, series) in panel.series.iter().enumerate() {
            let color = PALETTE[k % PALETTE.len()];
            let dash = DASHES[k % DASHES.len()];
            let mut pts = String::new();
            for (x, y) in series.x.iter().zip(&series.y) {
                if x.is_finite() && y.is_finite() {
                    let _ = write!(pts, "{:.2},{:.2} ", sx(*x), sy(*y));
                }
            }
            let dash_attr = if dash.is_empty() { String::new() } else { format!(r#" stroke-dasharray="{dash}""#) };
            let _ = writeln!(s, r#"<polyline fill="none" stroke="{color}" stroke-width="1.5"{dash_attr} points="{}"/>"#, pts.trim_end());
            let ly = y0 + TOP + 12.0 + 18.0 * k as f64;
            let lx = WIDTH - RIGHT + 10.0;
            let _ = writeln!(s, r#"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="1.5"{dash_attr}/>"#, lx + 24.0);
            let _ = writeln!(s, r#"<text x="{}" y="{}">{}</text>"#, lx + 30.0, ly + 4.0, escape(&series.label));
        }
    }
    s.push_str("</svg>\n");
    s
}

/// Perceptually ordered ramp from dark blue through green to yellow.
fn color(v: f64) -> String {
    const STOPS: [(f64, [f64; 3]); 5] = [
        (0.0, [68.0, 1.0, 84.0]),
        (0.25, [59.0, 82.0, 139.0]),
        (0.5, [33.0, 145.0, 140.0]),
        (0.75, [94.0, 201.0, 98.0]),
        (1.0, [253.0, 231.0, 37.0]),
    ];
    let v = if v.is_finite() { v.clamp(0.0, 1.0) } else { 0.0 };
    let i = STOPS.iter().rposition(|(x, _)| *x <= v).unwrap_or(0).min(STOPS.len() - 2);
    let (x0, c0) = STOPS[i];
    let (x1, c1) = STOPS[i + 1];
    let f = (v - x0) / (x1 - x0);
    let c: Vec<u8> = (0..3).map(|k| (c0[k] + f * (c1[k] - c0[k])).round() as u8).collect();
    format!("#{:02x}{:02x}{:02x}", c[0], c[1], c[2])
}

/// Heatmap with one row per label (bottom to top) and columns at `x`.
pub fn heatmap(title: &str, x_label: &str, y_label: &str, x: &[f64], rows: &[String], values: &[Vec<f64>]) -> String {
    let height = 360.0;
    let (pw, ph) = (WIDTH - LEFT - RIGHT, height - TOP - BOTTOM);
    let vmax = values.iter().flatten().copied().filter(|v| v.is_finite()).fold(0.0f64, f64::max).max(1e-12);
    let nr = rows.len().max(1) as f64;
    let nc = x.len().max(1);
    // Merge columns so at most ~200 cells are drawn per row.
    let group = nc.div_ceil(200);
    let cw = pw * group as f64 / nc as f64;
    let rh = ph / nr;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{height}" viewBox="0 0 {WIDTH} {height}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="18" text-anchor="middle" font-size="14">{}</text>"#, LEFT + pw / 2.0, escape(title));
    for (r, row) in values.iter().enumerate() {
        let y = TOP + ph - (r as f64 + 1.0) * rh;
        for (g, chunk) in row.chunks(group).enumerate() {
            let v = chunk.iter().sum::<f64>() / chunk.len() as f64;
            let _ = writeln!(
                s,
                r#"<rect x="{:.2}" y="{y:.2}" width="{:.2}" height="{rh:.2}" fill="{}"/>"#,
                LEFT + g as f64 * cw,
                cw + 0.3,
                color(v / vmax)
            );
        }
    }
    let _ = writeln!(s, r#"<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#);
    for (r, label) in rows.iter().enumerate() {
        let y = TOP + ph - (r as f64 + 0.5) * rh;
        let _ = writeln!(s, r#"<text x="{}" y="{:.2}" text-anchor="end">{}</text>"#, LEFT - 6.0, y + 4.0, escape(label));
    }
    let (xmin, xmax) = (x.first().copied().unwrap_or(0.0), x.last().copied().unwrap_or(1.0));
    for i in 0..=5 {
        let xv = xmin + i as f64 / 5.0 * (xmax - xmin);
        let px = LEFT + i as f64 / 5.0 * pw;
        let _ = writeln!(s, r#"<text x="{px:.2}" y="{}" text-anchor="middle">{}</text>"#, TOP + ph + 17.0, tick(xv));
    }
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, LEFT + pw / 2.0, height - 8.0, escape(x_label));
    let (lx, ly) = (16.0, TOP + ph / 2.0);
    let _ = writeln!(s, r#"<text x="{lx}" y="{ly}" text-anchor="middle" transform="rotate(-90 {lx} {ly})">{}</text>"#, escape(y_label));
    // Colour bar.
    let bx = WIDTH - RIGHT + 30.0;
    for i in 0..50 {
        let f = i as f64 / 49.0;
        let _ = writeln!(s, r#"<rect x="{bx}" y="{:.2}" width="16" height="{:.2}" fill="{}"/>"#, TOP + ph * (1.0 - f) - ph / 50.0, ph / 50.0 + 0.3, color(f));
    }
    let _ = writeln!(s, r#"<text x="{}" y="{}">{}</text>"#, bx + 22.0, TOP + 8.0, tick(vmax));
    let _ = writeln!(s, r#"<text x="{}" y="{}">0</text>"#, bx + 22.0, TOP + ph);
    s.push_str("</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chart_contains_one_polyline_per_series() {
        let series = |label: &str| Series { label: label.into(), x: vec![0.0, 1.0, 2.0], y: vec![0.0, 0.5, f64::NAN] };
        let svg = line_chart("t", &[Panel { title: "C <t>".into(), y_label: "C".into(), series: vec![series("a"), series("b")] }]);
        assert_eq!(svg.matches("<polyline").count(), 2);
        assert!(svg.contains("C &lt;t&gt;"));
        assert!(!svg.contains("NaN"));
        assert!(svg.trim_end().ends_with("</svg>"));
    }

    #[test]
    fn heatmap_colours_span_the_ramp() {
        assert_eq!(color(0.0), "#440154");
        assert_eq!(color(1.0), "#fde725");
        let svg = heatmap("C", "t", "γ", &[0.0, 1.0], &["0.1".into(), "1".into()], &[vec![0.0, 0.2], vec![0.1, 0.4]]);
        assert!(svg.contains("#fde725"));
        assert_eq!(tick(-0.0001), "0");
        assert_eq!(tick(2.5), "2.5");
    }
}
