//! Static SVG 1.1 log-log plot of `Δa_eff` against `Δa`.

use std::fmt::Write as _;

/// One scan row as plotted.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScanPoint {
    pub delta_a: f64,
    pub simulated: Option<f64>,
    pub analytic: Option<f64>,
    pub classical: f64,
    pub quantum: f64,
}

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 480.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 20.0;
const BOTTOM: f64 = 60.0;

struct Axes {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
}

impl Axes {
    fn px(&self, v: f64) -> f64 {
        LEFT + (v.log10() - self.x0) / (self.x1 - self.x0) * (WIDTH - LEFT - RIGHT)
    }

    fn py(&self, v: f64) -> f64 {
        HEIGHT - BOTTOM - (v.log10() - self.y0) / (self.y1 - self.y0) * (HEIGHT - TOP - BOTTOM)
    }
}

/// Decade-aligned `log10` bounds covering `values`.
fn bounds(values: impl Iterator<Item = f64>) -> Option<(f64, f64)> {
    let (lo, hi) = values
        .filter(|v| v.is_finite() && *v > 0.0)
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
            (lo.min(v.log10()), hi.max(v.log10()))
        });
    if lo > hi {
        return None;
    }
    let (lo, hi) = (lo.floor(), hi.ceil());
    Some(if lo == hi { (lo, lo + 1.0) } else { (lo, hi) })
}

fn polyline(out: &mut String, axes: &Axes, pts: &[(f64, f64)], style: &str) {
    let coords: Vec<String> = pts
        .iter()
        .filter(|(x, y)| x.is_finite() && y.is_finite() && *x > 0.0 && *y > 0.0)
        .map(|&(x, y)| format!("{:.2},{:.2}", axes.px(x), axes.py(y)))
        .collect();
    if coords.len() >= 2 {
        writeln!(
            out,
            r#"<polyline fill="none" clip-path="url(#area)" {style} points="{}"/>"#,
            coords.join(" ")
        )
        .unwrap();
    }
}

const ANALYTIC_STYLE: &str = r##"stroke="#1f4e9c" stroke-width="1.8""##;
const CLASSICAL_STYLE: &str = r##"stroke="#555555" stroke-width="1.2" stroke-dasharray="7 4""##;
const QUANTUM_STYLE: &str =
    r##"stroke="#b03a2e" stroke-width="1.2" stroke-dasharray="9 3 2 3""##;

/// Simulated widths as dots, the linear-theory width as a solid line, and
/// the classical (dashed) and quantum (dot-dash) asymptotes.
pub fn scan_svg(points: &[ScanPoint]) -> String {
    let xs = points.iter().map(|p| p.delta_a);
    let (x0, x1) = bounds(xs).unwrap_or((-1.0, 1.0));
    let ys = points
        .iter()
        .flat_map(|p| [p.simulated, p.analytic, Some(p.classical)])
        .flatten();
    let (y0, y1) = bounds(ys).unwrap_or((-1.0, 1.0));
    let axes = Axes { x0, x1, y0, y1 };

    let mut out = String::new();
    writeln!(out, r#"<?xml version="1.0" encoding="UTF-8"?>"#).unwrap();
    writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    )
    .unwrap();
    let (pw, ph) = (WIDTH - LEFT - RIGHT, HEIGHT - TOP - BOTTOM);
    writeln!(
        out,
        r#"<defs><clipPath id="area"><rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}"/></clipPath></defs>"#
    )
    .unwrap();
    writeln!(out, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#).unwrap();

    for k in (x0 as i32)..=(x1 as i32) {
        let x = axes.px(10f64.powi(k));
        writeln!(
            out,
            r##"<line x1="{x:.2}" y1="{TOP}" x2="{x:.2}" y2="{:.2}" stroke="#dddddd"/>"##,
            HEIGHT - BOTTOM
        )
        .unwrap();
        writeln!(
            out,
            r#"<text x="{x:.2}" y="{:.2}" text-anchor="middle">10<tspan dy="-5" font-size="9">{k}</tspan></text>"#,
            HEIGHT - BOTTOM + 18.0
        )
        .unwrap();
    }
    for k in (y0 as i32)..=(y1 as i32) {
        let y = axes.py(10f64.powi(k));
        writeln!(
            out,
            r##"<line x1="{LEFT}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="#dddddd"/>"##,
            WIDTH - RIGHT
        )
        .unwrap();
        writeln!(
            out,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="end">10<tspan dy="-5" font-size="9">{k}</tspan></text>"#,
            LEFT - 8.0,
            y + 4.0
        )
        .unwrap();
    }
    writeln!(
        out,
        r#"<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#
    )
    .unwrap();
    writeln!(
        out,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">Δa</text>"#,
        LEFT + pw / 2.0,
        HEIGHT - 15.0
    )
    .unwrap();
    writeln!(
        out,
        r#"<text x="20" y="{:.2}" text-anchor="middle" transform="rotate(-90 20 {:.2})">Δa_eff</text>"#,
        TOP + ph / 2.0,
        TOP + ph / 2.0
    )
    .unwrap();

    let line = |f: fn(&ScanPoint) -> Option<f64>| -> Vec<(f64, f64)> {
        points
            .iter()
            .filter_map(|p| f(p).map(|v| (p.delta_a, v)))
            .collect()
    };
    polyline(&mut out, &axes, &line(|p| Some(p.classical)), CLASSICAL_STYLE);
    polyline(&mut out, &axes, &line(|p| Some(p.quantum)), QUANTUM_STYLE);
    polyline(&mut out, &axes, &line(|p| p.analytic), ANALYTIC_STYLE);
    for (x, y) in line(|p| p.simulated) {
        if x > 0.0 && y > 0.0 && x.is_finite() && y.is_finite() {
            writeln!(
                out,
                r#"<circle cx="{:.2}" cy="{:.2}" r="3.5" fill="black" clip-path="url(#area)"/>"#,
                axes.px(x),
                axes.py(y)
            )
            .unwrap();
        }
    }

    let lx = LEFT + 14.0;
    let mut ly = TOP + 18.0;
    for (label, style) in [
        ("linear theory", ANALYTIC_STYLE),
        ("classical limit", CLASSICAL_STYLE),
        ("quantum limit", QUANTUM_STYLE),
    ] {
        writeln!(
            out,
            r#"<line x1="{lx:.2}" y1="{ly:.2}" x2="{:.2}" y2="{ly:.2}" {style}/>"#,
            lx + 30.0
        )
        .unwrap();
        writeln!(out, r#"<text x="{:.2}" y="{:.2}">{label}</text>"#, lx + 38.0, ly + 4.0).unwrap();
        ly += 18.0;
    }
    writeln!(
        out,
        r#"<circle cx="{:.2}" cy="{ly:.2}" r="3.5" fill="black"/>"#,
        lx + 15.0
    )
    .unwrap();
    writeln!(out, r#"<text x="{:.2}" y="{:.2}">simulation</text>"#, lx + 38.0, ly + 4.0).unwrap();
    writeln!(out, "</svg>").unwrap();
    out
}
