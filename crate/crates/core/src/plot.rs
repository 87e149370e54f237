//! Minimal SVG writers: superimposed line plots and heatmaps.

use std::fmt::Write;

use ndarray::Array2;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 400.0;
const MARGIN: f64 = 40.0;
pub const PALETTE: [&str; 5] = ["#d62728", "#1f77b4", "#2ca02c", "#ff7f0e", "#9467bd"];
const MUTED: &str = "#b0b0b0";

fn escape(text: &str) -> String {
    text.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

fn bounds(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
        (lo.min(v), hi.max(v))
    });
    if !lo.is_finite() || !hi.is_finite() {
        (0.0, 1.0)
    } else if hi > lo {
        (lo, hi)
    } else {
        (lo - 0.5, hi + 0.5)
    }
}

pub struct Line<'a> {
    pub points: &'a [(f64, f64)],
    /// Index into [`PALETTE`]; `None` draws a thin muted line.
    pub highlight: Option<usize>,
    pub label: String,
}

/// One `<polyline>` per line; highlighted lines are drawn last.
pub fn line_plot(title: &str, lines: &[Line]) -> String {
    let (x0, x1) = bounds(lines.iter().flat_map(|l| l.points.iter().map(|p| p.0)));
    let (y0, y1) = bounds(lines.iter().flat_map(|l| l.points.iter().map(|p| p.1)));
    let sx = |x: f64| MARGIN + (x - x0) / (x1 - x0) * (WIDTH - 2.0 * MARGIN);
    let sy = |y: f64| HEIGHT - MARGIN - (y - y0) / (y1 - y0) * (HEIGHT - 2.0 * MARGIN);
    let mut svg = header(title);
    let zero = sy(0.0_f64.clamp(y0, y1));
    let _ = writeln!(
        svg,
        r#"<line x1="{MARGIN}" y1="{zero:.2}" x2="{:.2}" y2="{zero:.2}" stroke="black" stroke-width="0.5"/>"#,
        WIDTH - MARGIN
    );
    let mut ordered: Vec<&Line> = lines.iter().collect();
    ordered.sort_by_key(|l| l.highlight.is_some());
    for line in ordered {
        let points: Vec<String> = line
            .points
            .iter()
            .map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y)))
            .collect();
        let (color, width) = match line.highlight {
            Some(i) => (PALETTE[i % PALETTE.len()], 2.0),
            None => (MUTED, 0.8),
        };
        let _ = writeln!(
            svg,
            r#"<polyline fill="none" stroke="{color}" stroke-width="{width}" points="{}"><title>{}</title></polyline>"#,
            points.join(" "),
            escape(&line.label)
        );
    }
    svg.push_str("</svg>\n");
    svg
}

/// Diverging blue-white-red heatmap, row 0 at the bottom.
pub fn heatmap(title: &str, matrix: &Array2<f64>) -> String {
    let (rows, cols) = matrix.dim();
    let limit = matrix
        .iter()
        .fold(0.0f64, |m, v| m.max(v.abs()))
        .max(1e-300);
    let cw = (WIDTH - 2.0 * MARGIN) / cols.max(1) as f64;
    let ch = (HEIGHT - 2.0 * MARGIN) / rows.max(1) as f64;
    let mut svg = header(title);
    for r in 0..rows {
        for c in 0..cols {
            let v = (matrix[[r, c]] / limit).clamp(-1.0, 1.0);
            let fade = (255.0 * (1.0 - v.abs())).round() as u8;
            let color = if v >= 0.0 {
                format!("rgb(255,{fade},{fade})")
            } else {
                format!("rgb({fade},{fade},255)")
            };
            let x = MARGIN + c as f64 * cw;
            let y = HEIGHT - MARGIN - (r + 1) as f64 * ch;
            let _ = writeln!(
                svg,
                r#"<rect x="{x:.2}" y="{y:.2}" width="{cw:.2}" height="{ch:.2}" fill="{color}"/>"#
            );
        }
    }
    svg.push_str("</svg>\n");
    svg
}

fn header(title: &str) -> String {
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    let _ = writeln!(
        svg,
        r#"<text x="{MARGIN}" y="20" font-family="sans-serif" font-size="14">{}</text>"#,
        escape(title)
    );
    svg
}
