//! Contour plots of prediction grids as standalone SVG.

use std::fmt::Write as _;

use multiverse_core::analysis::PredictionGrid;
use multiverse_core::space::{Dimension, DimensionKind};

pub const LEVELS: usize = 10;

const WIDTH: f64 = 560.0;
const HEIGHT: f64 = 520.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 110.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 60.0;

/// Observed point in unit coordinates of the two free dimensions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Marker {
    pub x: f64,
    pub y: f64,
    pub ok: bool,
}

/// Which grid field to draw.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Field {
    Mean,
    Variance,
}

/// `LEVELS` evenly spaced iso-values strictly inside `[lo, hi]`.
pub fn contour_levels(lo: f64, hi: f64) -> Vec<f64> {
    if !(hi > lo) {
        return Vec::new();
    }
    let step = (hi - lo) / (LEVELS + 1) as f64;
    (1..=LEVELS).map(|k| lo + k as f64 * step).collect()
}

/// Iso-line segments of `values` (row-major, `values[j * nx + i]`) at
/// `level`, in unit coordinates.
pub fn marching_squares(values: &[f64], nx: usize, ny: usize, level: f64) -> Vec<[(f64, f64); 2]> {
    let at = |i: usize, j: usize| values[j * nx + i];
    let sx = 1.0 / (nx - 1) as f64;
    let sy = 1.0 / (ny - 1) as f64;
    let mut segments = Vec::new();
    for j in 0..ny - 1 {
        for i in 0..nx - 1 {
            // Corners counter-clockwise from bottom-left.
            let v = [at(i, j), at(i + 1, j), at(i + 1, j + 1), at(i, j + 1)];
            let c = [
                (i as f64 * sx, j as f64 * sy),
                ((i + 1) as f64 * sx, j as f64 * sy),
                ((i + 1) as f64 * sx, (j + 1) as f64 * sy),
                (i as f64 * sx, (j + 1) as f64 * sy),
            ];
            let above: Vec<bool> = v.iter().map(|x| *x > level).collect();
            let cross = |e: usize| {
                let (a, b) = (e, (e + 1) % 4);
                let t = ((level - v[a]) / (v[b] - v[a])).clamp(0.0, 1.0);
                (c[a].0 + t * (c[b].0 - c[a].0), c[a].1 + t * (c[b].1 - c[a].1))
            };
            let edges: Vec<usize> = (0..4).filter(|&e| above[e] != above[(e + 1) % 4]).collect();
            match edges.len() {
                2 => segments.push([cross(edges[0]), cross(edges[1])]),
                4 => {
                    let centre = v.iter().sum::<f64>() / 4.0 > level;
                    if centre == above[0] {
                        segments.push([cross(0), cross(1)]);
                        segments.push([cross(2), cross(3)]);
                    } else {
                        segments.push([cross(3), cross(0)]);
                        segments.push([cross(1), cross(2)]);
                    }
                }
                _ => {}
            }
        }
    }
    segments
}

fn superscript(n: i32) -> String {
    n.to_string()
        .chars()
        .map(|ch| match ch {
            '-' => '⁻',
            '0' => '⁰',
            '1' => '¹',
            '2' => '²',
            '3' => '³',
            '4' => '⁴',
            '5' => '⁵',
            '6' => '⁶',
            '7' => '⁷',
            '8' => '⁸',
            '9' => '⁹',
            other => other,
        })
        .collect()
}

fn short(x: f64) -> String {
    let s = format!("{:.3}", x);
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" {
        "0".into()
    } else {
        s.into()
    }
}

/// Tick positions (unit coordinates) and labels for an axis.
pub fn axis_ticks(dim: &Dimension) -> Vec<(f64, String)> {
    let powers = |lower: f64, upper: f64, base: f64| -> Vec<i32> {
        let lo = (lower.log(base) - 1e-9).ceil() as i32;
        let hi = (upper.log(base) + 1e-9).floor() as i32;
        (lo..=hi).collect()
    };
    match &dim.kind {
        DimensionKind::ContinuousLog10 { lower, upper } => powers(*lower, *upper, 10.0)
            .into_iter()
            .filter_map(|k| {
                let u = dim.to_unit(10f64.powi(k)).ok()?;
                Some((u, format!("10{}", superscript(k))))
            })
            .collect(),
        DimensionKind::IntegerLog2 { lower, upper } => powers(*lower, *upper, 2.0)
            .into_iter()
            .filter_map(|k| {
                let v = 2f64.powi(k);
                Some((dim.to_unit(v).ok()?, format!("{v}")))
            })
            .collect(),
        DimensionKind::ContinuousLinear { lower, upper } => (0..=4)
            .map(|k| {
                let u = k as f64 / 4.0;
                (u, short(lower + u * (upper - lower)))
            })
            .collect(),
        DimensionKind::Categorical { .. } => Vec::new(),
    }
}

fn colour(t: f64) -> String {
    // Two-stop ramp from dark blue to pale yellow.
    let t = t.clamp(0.0, 1.0);
    let lerp = |a: f64, b: f64| (a + t * (b - a)).round() as u8;
    format!("#{:02x}{:02x}{:02x}", lerp(38.0, 250.0), lerp(54.0, 231.0), lerp(124.0, 140.0))
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

pub fn render(
    grid: &PredictionGrid,
    field: Field,
    x_dim: &Dimension,
    y_dim: &Dimension,
    markers: &[Marker],
    title: &str,
) -> String {
    let values = match field {
        Field::Mean => &grid.mean,
        Field::Variance => &grid.variance,
    };
    let r = grid.resolution();
    let (lo, hi) = values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    let pw = WIDTH - LEFT - RIGHT;
    let ph = HEIGHT - TOP - BOTTOM;
    let px = |u: f64| LEFT + u * pw;
    let py = |u: f64| TOP + (1.0 - u) * ph;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<title>{}</title>"#, escape(title));
    let _ = writeln!(s, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);

    // Cell shading, one rectangle per grid node.
    let _ = writeln!(s, r#"<g class="shading">"#);
    let cw = pw / (r - 1) as f64;
    let ch = ph / (r - 1) as f64;
    for j in 0..r {
        for i in 0..r {
            let t = if hi > lo { (values[j * r + i] - lo) / (hi - lo) } else { 0.5 };
            let x0 = (px(grid.x.unit[i]) - cw / 2.0).max(LEFT);
            let x1 = (px(grid.x.unit[i]) + cw / 2.0).min(LEFT + pw);
            let y0 = (py(grid.y.unit[j]) - ch / 2.0).max(TOP);
            let y1 = (py(grid.y.unit[j]) + ch / 2.0).min(TOP + ph);
            let _ = writeln!(
                s,
                r#"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="{}"/>"#,
                x0,
                y0,
                x1 - x0,
                y1 - y0,
                colour(t)
            );
        }
    }
    let _ = writeln!(s, "</g>");

    let _ = writeln!(s, r#"<g class="contours" fill="none" stroke="black" stroke-width="0.8">"#);
    for level in contour_levels(lo, hi) {
        let segs = marching_squares(values, r, r, level);
        if segs.is_empty() {
            continue;
        }
        let mut d = String::new();
        for [a, b] in segs {
            let _ = write!(d, "M{:.2},{:.2}L{:.2},{:.2}", px(a.0), py(a.1), px(b.0), py(b.1));
        }
        let _ = writeln!(s, r#"<path class="contour" data-level="{level}" d="{d}"/>"#);
    }
    let _ = writeln!(s, "</g>");

    let _ = writeln!(s, r#"<g class="observations">"#);
    for m in markers {
        let (x, y) = (px(m.x), py(m.y));
        if m.ok {
            let _ = writeln!(
                s,
                r#"<circle cx="{x:.2}" cy="{y:.2}" r="3.5" fill="white" stroke="black" stroke-width="0.8"/>"#
            );
        } else {
            for (dx, dy) in [(4.0, 4.0), (4.0, -4.0)] {
                let _ = writeln!(
                    s,
                    r#"<line class="failed" x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="black" stroke-width="1.6"/>"#,
                    x - dx,
                    y - dy,
                    x + dx,
                    y + dy
                );
            }
        }
    }
    let _ = writeln!(s, "</g>");

    let _ = writeln!(
        s,
        r#"<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#
    );
    let _ = writeln!(s, r#"<g class="x-axis">"#);
    for (u, label) in axis_ticks(x_dim) {
        let x = px(u);
        let _ = writeln!(
            s,
            r#"<line x1="{x:.2}" y1="{:.2}" x2="{x:.2}" y2="{:.2}" stroke="black"/><text x="{x:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            TOP + ph,
            TOP + ph + 5.0,
            TOP + ph + 19.0,
            escape(&label)
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
        LEFT + pw / 2.0,
        HEIGHT - 15.0,
        escape(&grid.x.name)
    );
    let _ = writeln!(s, "</g>");
    let _ = writeln!(s, r#"<g class="y-axis">"#);
    for (u, label) in axis_ticks(y_dim) {
        let y = py(u);
        let _ = writeln!(
            s,
            r#"<line x1="{:.2}" y1="{y:.2}" x2="{LEFT}" y2="{y:.2}" stroke="black"/><text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#,
            LEFT - 5.0,
            LEFT - 8.0,
            y + 4.0,
            escape(&label)
        );
    }
    let _ = writeln!(
        s,
        r#"<text transform="translate(20,{:.2}) rotate(-90)" text-anchor="middle">{}</text>"#,
        TOP + ph / 2.0,
        escape(&grid.y.name)
    );
    let _ = writeln!(s, "</g>");

    // Colour bar.
    let bx = LEFT + pw + 25.0;
    let _ = writeln!(s, r#"<g class="legend">"#);
    for k in 0..50 {
        let t = k as f64 / 49.0;
        let _ = writeln!(
            s,
            r#"<rect x="{bx}" y="{:.2}" width="16" height="{:.2}" fill="{}"/>"#,
            TOP + (1.0 - t) * (ph - ph / 50.0),
            ph / 50.0 + 0.5,
            colour(t)
        );
    }
    for (t, v) in [(0.0, lo), (1.0, hi)] {
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}">{}</text>"#,
            bx + 20.0,
            TOP + (1.0 - t) * ph + 4.0,
            escape(&format!("{v:.3e}"))
        );
    }
    let _ = writeln!(s, "</g>");
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="22" text-anchor="middle" font-size="14">{}</text>"#,
        LEFT + pw / 2.0,
        escape(title)
    );
    s.push_str("</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn log_ticks_use_superscripts() {
        let d = Dimension::log10("gamma", 1e-4, 1.0).unwrap();
        let labels: Vec<String> = axis_ticks(&d).into_iter().map(|t| t.1).collect();
        assert_eq!(labels, ["10⁻⁴", "10⁻³", "10⁻²", "10⁻¹", "10⁰"]);
        let ticks = axis_ticks(&d);
        assert!(ticks[0].0.abs() < 1e-12 && (ticks[4].0 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn linear_and_log2_ticks() {
        let d = Dimension::linear("x", -1.0, 1.0).unwrap();
        let labels: Vec<String> = axis_ticks(&d).into_iter().map(|t| t.1).collect();
        assert_eq!(labels, ["-1", "-0.5", "0", "0.5", "1"]);
        let b = Dimension::log2_int("batch", 8.0, 64.0).unwrap();
        let labels: Vec<String> = axis_ticks(&b).into_iter().map(|t| t.1).collect();
        assert_eq!(labels, ["8", "16", "32", "64"]);
    }

    #[test]
    fn single_cell_crossing() {
        // Plane v = x on a 2×2 grid; the 0.5 level is the vertical mid-line.
        let segs = marching_squares(&[0.0, 1.0, 0.0, 1.0], 2, 2, 0.5);
        assert_eq!(segs.len(), 1);
        for p in segs[0] {
            assert!((p.0 - 0.5).abs() < 1e-12);
        }
        assert!(marching_squares(&[0.0, 1.0, 0.0, 1.0], 2, 2, 2.0).is_empty());
    }

    #[test]
    fn saddle_makes_two_segments() {
        let segs = marching_squares(&[1.0, 0.0, 0.0, 1.0], 2, 2, 0.5);
        assert_eq!(segs.len(), 2);
    }

    #[test]
    fn levels_lie_inside_range() {
        let l = contour_levels(0.0, 11.0);
        assert_eq!(l.len(), LEVELS);
        assert_eq!(l[0], 1.0);
        assert_eq!(l[9], 10.0);
        assert!(contour_levels(1.0, 1.0).is_empty());
    }
}
