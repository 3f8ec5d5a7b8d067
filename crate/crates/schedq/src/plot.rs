//! Minimal self-contained SVG line plots for KDE curves.
//!
//! Nothing fancy: one polyline per curve, an optional vertical marker for
//! the greedy baseline, axis labels at the extremes. Output is a plain SVG
//! string, deterministic for identical inputs.

use crate::eval::KdeCurve;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 400.0;
const MARGIN: f64 = 54.0;

/// Renders a density curve, optionally with a dashed vertical line marking
/// the greedy baseline's mean total reward.
pub fn kde_svg(curve: &KdeCurve, greedy_marker: Option<f64>, title: &str) -> String {
    let x_min = curve
        .grid
        .first()
        .copied()
        .unwrap_or(0.0)
        .min(greedy_marker.unwrap_or(f64::INFINITY));
    let x_max = curve
        .grid
        .last()
        .copied()
        .unwrap_or(1.0)
        .max(greedy_marker.unwrap_or(f64::NEG_INFINITY));
    let y_max = curve.density.iter().cloned().fold(0.0_f64, f64::max).max(1e-12);

    let x_span = (x_max - x_min).max(1e-12);
    let to_x = |x: f64| MARGIN + (x - x_min) / x_span * (WIDTH - 2.0 * MARGIN);
    let to_y = |y: f64| HEIGHT - MARGIN - y / y_max * (HEIGHT - 2.0 * MARGIN);

    let points: Vec<String> = curve
        .grid
        .iter()
        .zip(&curve.density)
        .map(|(&x, &y)| format!("{:.2},{:.2}", to_x(x), to_y(y)))
        .collect();

    let mut svg = String::new();
    svg.push_str(&format!(
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    ));
    svg.push('\n');
    svg.push_str(r#"<rect width="100%" height="100%" fill="white"/>"#);
    svg.push('\n');
    svg.push_str(&format!(
        r#"<text x="{:.1}" y="24" font-family="sans-serif" font-size="15" text-anchor="middle">{}</text>"#,
        WIDTH / 2.0,
        xml_escape(title)
    ));
    svg.push('\n');
    // axes
    svg.push_str(&format!(
        r#"<line x1="{m}" y1="{b}" x2="{r}" y2="{b}" stroke="black"/>"#,
        m = MARGIN,
        b = HEIGHT - MARGIN,
        r = WIDTH - MARGIN
    ));
    svg.push('\n');
    svg.push_str(&format!(
        r#"<line x1="{m}" y1="{t}" x2="{m}" y2="{b}" stroke="black"/>"#,
        m = MARGIN,
        t = MARGIN,
        b = HEIGHT - MARGIN
    ));
    svg.push('\n');
    // axis extreme labels
    svg.push_str(&format!(
        r#"<text x="{:.1}" y="{:.1}" font-family="sans-serif" font-size="11" text-anchor="middle">{:.1}</text>"#,
        to_x(x_min),
        HEIGHT - MARGIN + 16.0,
        x_min
    ));
    svg.push('\n');
    svg.push_str(&format!(
        r#"<text x="{:.1}" y="{:.1}" font-family="sans-serif" font-size="11" text-anchor="middle">{:.1}</text>"#,
        to_x(x_max),
        HEIGHT - MARGIN + 16.0,
        x_max
    ));
    svg.push('\n');
    svg.push_str(&format!(
        r#"<text x="{:.1}" y="{:.1}" font-family="sans-serif" font-size="11" text-anchor="end">{:.3}</text>"#,
        MARGIN - 6.0,
        to_y(y_max) + 4.0,
        y_max
    ));
    svg.push('\n');
    svg.push_str(&format!(
        r#"<text x="{:.1}" y="{:.1}" font-family="sans-serif" font-size="12" text-anchor="middle">total reward</text>"#,
        WIDTH / 2.0,
        HEIGHT - 12.0
    ));
    svg.push('\n');

    if let Some(g) = greedy_marker {
        svg.push_str(&format!(
            r#"<line x1="{x:.2}" y1="{t}" x2="{x:.2}" y2="{b}" stroke="crimson" stroke-dasharray="6 4"/>"#,
            x = to_x(g),
            t = MARGIN,
            b = HEIGHT - MARGIN
        ));
        svg.push('\n');
        svg.push_str(&format!(
            r#"<text x="{x:.2}" y="{y:.1}" font-family="sans-serif" font-size="11" fill="crimson" text-anchor="middle">greedy</text>"#,
            x = to_x(g),
            y = MARGIN - 6.0
        ));
        svg.push('\n');
    }

    svg.push_str(&format!(
        r#"<polyline fill="none" stroke="steelblue" stroke-width="1.6" points="{}"/>"#,
        points.join(" ")
    ));
    svg.push_str("\n</svg>\n");
    svg
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
