//! Self-contained SVG rendering of step curves and hazard-ratio forest plots.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use hazardlab_core::numfmt::sig;
use hazardlab_core::{CoxFit64, Result, SurvivalCurve64};

const WIDTH: f64 = 760.0;
const HEIGHT: f64 = 480.0;
const LEFT: f64 = 72.0;
const RIGHT: f64 = 180.0;
const TOP: f64 = 36.0;
const BOTTOM: f64 = 56.0;
const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlotStyle {
    Survival,
    CumulativeHazard,
}

impl PlotStyle {
    fn y_label(self) -> &'static str {
        match self {
            PlotStyle::Survival => "survival probability",
            PlotStyle::CumulativeHazard => "cumulative hazard",
        }
    }

    fn transform(self, s: f64) -> f64 {
        match self {
            PlotStyle::Survival => s,
            PlotStyle::CumulativeHazard => {
                if s > 0.0 {
                    -s.ln()
                } else {
                    f64::INFINITY
                }
            }
        }
    }
}

/// One plotted point: value and band on the plotted scale.
struct Point {
    t: f64,
    value: f64,
    lower: f64,
    upper: f64,
    at_risk: usize,
}

struct Trace {
    label: String,
    points: Vec<Point>,
    end: f64,
}

fn trace(curve: &SurvivalCurve64, index: usize, style: PlotStyle) -> Trace {
    let mut points = Vec::with_capacity(curve.len() + 1);
    if curve.times.first().is_none_or(|&t| t > 0.0) {
        points.push(Point {
            t: 0.0,
            value: style.transform(1.0),
            lower: style.transform(1.0),
            upper: style.transform(1.0),
            at_risk: curve.total,
        });
    }
    for i in 0..curve.len() {
        let (lo, hi) = (
            style.transform(curve.ci_lower[i]),
            style.transform(curve.ci_upper[i]),
        );
        points.push(Point {
            t: curve.times[i],
            value: style.transform(curve.survival[i]),
            lower: lo.min(hi),
            upper: lo.max(hi),
            at_risk: curve.at_risk[i],
        });
    }
    let last = points.last().map_or(0.0, |p| p.t);
    Trace {
        label: curve
            .label
            .clone()
            .unwrap_or_else(|| format!("curve {}", index + 1)),
        points,
        end: curve.max_time.max(last),
    }
}

fn nice_step(range: f64, target_ticks: usize) -> f64 {
    let raw = range / target_ticks as f64;
    let mag = 10f64.powf(raw.log10().floor());
    let norm = raw / mag;
    let nice = if norm <= 1.0 {
        1.0
    } else if norm <= 2.0 {
        2.0
    } else if norm <= 5.0 {
        5.0
    } else {
        10.0
    };
    nice * mag
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

struct Frame {
    x_max: f64,
    y_min: f64,
    y_max: f64,
}

impl Frame {
    fn x(&self, t: f64) -> f64 {
        LEFT + (WIDTH - LEFT - RIGHT) * (t / self.x_max)
    }

    fn y(&self, v: f64) -> f64 {
        let v = v.clamp(self.y_min, self.y_max);
        TOP + (HEIGHT - TOP - BOTTOM) * (1.0 - (v - self.y_min) / (self.y_max - self.y_min))
    }
}

fn axes(svg: &mut String, frame: &Frame, y_label: &str) {
    let (x0, x1) = (LEFT, WIDTH - RIGHT);
    let (y0, y1) = (HEIGHT - BOTTOM, TOP);
    let _ = writeln!(
        svg,
        r##"<rect x="{x0:.2}" y="{y1:.2}" width="{:.2}" height="{:.2}" fill="none" stroke="#444"/>"##,
        x1 - x0,
        y0 - y1
    );
    let step = nice_step(frame.x_max, 6);
    let mut t = 0.0;
    while t <= frame.x_max * (1.0 + 1e-9) {
        let x = frame.x(t);
        let _ = writeln!(
            svg,
            r##"<line x1="{x:.2}" y1="{y0:.2}" x2="{x:.2}" y2="{:.2}" stroke="#444"/><text x="{x:.2}" y="{:.2}" font-size="11" text-anchor="middle">{}</text>"##,
            y0 + 5.0,
            y0 + 18.0,
            sig(t, 6)
        );
        t += step;
    }
    let step = nice_step(frame.y_max - frame.y_min, 5);
    let mut v = frame.y_min;
    while v <= frame.y_max * (1.0 + 1e-9) + 1e-12 {
        let y = frame.y(v);
        let _ = writeln!(
            svg,
            r##"<line x1="{:.2}" y1="{y:.2}" x2="{x0:.2}" y2="{y:.2}" stroke="#444"/><text x="{:.2}" y="{:.2}" font-size="11" text-anchor="end">{}</text>"##,
            x0 - 5.0,
            x0 - 8.0,
            y + 4.0,
            sig(v, 6)
        );
        v += step;
    }
    let _ = writeln!(
        svg,
        r#"<text x="{:.2}" y="{:.2}" font-size="13" text-anchor="middle">time (s)</text>"#,
        (x0 + x1) / 2.0,
        HEIGHT - 14.0
    );
    let _ = writeln!(
        svg,
        r#"<text x="18" y="{:.2}" font-size="13" text-anchor="middle" transform="rotate(-90 18 {:.2})">{}</text>"#,
        (y0 + y1) / 2.0,
        (y0 + y1) / 2.0,
        y_label
    );
}

fn step_path(frame: &Frame, tr: &Trace) -> String {
    let mut d = String::new();
    for (i, p) in tr.points.iter().enumerate() {
        if i == 0 {
            let _ = write!(d, "M{:.2},{:.2}", frame.x(p.t), frame.y(p.value));
        } else {
            let _ = write!(d, " H{:.2} V{:.2}", frame.x(p.t), frame.y(p.value));
        }
    }
    let _ = write!(d, " H{:.2}", frame.x(tr.end));
    d
}

fn band_path(frame: &Frame, tr: &Trace) -> String {
    let mut upper = Vec::new();
    let mut lower = Vec::new();
    for (i, p) in tr.points.iter().enumerate() {
        let next = tr.points.get(i + 1).map_or(tr.end, |n| n.t);
        upper.push((frame.x(p.t), frame.y(p.upper)));
        upper.push((frame.x(next), frame.y(p.upper)));
        lower.push((frame.x(p.t), frame.y(p.lower)));
        lower.push((frame.x(next), frame.y(p.lower)));
    }
    let mut d = String::new();
    for (i, (x, y)) in upper.iter().chain(lower.iter().rev()).enumerate() {
        let _ = write!(d, "{}{x:.2},{y:.2}", if i == 0 { "M" } else { " L" });
    }
    d.push_str(" Z");
    d
}

/// Renders curves as SVG; returns the document and the CSV of plotted points.
pub fn render(curves: &[SurvivalCurve64], style: PlotStyle) -> (String, String) {
    let traces: Vec<Trace> = curves
        .iter()
        .enumerate()
        .map(|(i, c)| trace(c, i, style))
        .collect();
    let x_max = traces.iter().map(|t| t.end).fold(0.0, f64::max);
    let x_max = if x_max > 0.0 { x_max } else { 1.0 };
    let y_max = match style {
        PlotStyle::Survival => 1.0,
        PlotStyle::CumulativeHazard => {
            let finite = traces
                .iter()
                .flat_map(|t| t.points.iter().flat_map(|p| [p.value, p.upper]))
                .filter(|v| v.is_finite())
                .fold(0.0, f64::max);
            if finite > 0.0 {
                finite * 1.05
            } else {
                1.0
            }
        }
    };
    let frame = Frame {
        x_max,
        y_min: 0.0,
        y_max,
    };

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif">"#
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    axes(&mut svg, &frame, style.y_label());
    for (i, tr) in traces.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let _ = writeln!(
            svg,
            r#"<path class="band" d="{}" fill="{color}" fill-opacity="0.18" stroke="none"/>"#,
            band_path(&frame, tr)
        );
    }
    for (i, tr) in traces.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let _ = writeln!(
            svg,
            r#"<path class="trace" data-label="{}" d="{}" fill="none" stroke="{color}" stroke-width="2"/>"#,
            escape(&tr.label),
            step_path(&frame, tr)
        );
    }
    let lx = WIDTH - RIGHT + 16.0;
    for (i, tr) in traces.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let ly = TOP + 14.0 + 20.0 * i as f64;
        let _ = writeln!(
            svg,
            r#"<g class="legend"><line x1="{lx:.2}" y1="{ly:.2}" x2="{:.2}" y2="{ly:.2}" stroke="{color}" stroke-width="3"/><text x="{:.2}" y="{:.2}" font-size="12">{}</text></g>"#,
            lx + 22.0,
            lx + 28.0,
            ly + 4.0,
            escape(&tr.label)
        );
    }
    svg.push_str("</svg>\n");

    let mut csv = String::from("label,t,value,ci_lower,ci_upper,at_risk\n");
    for tr in &traces {
        let label = if tr.label.contains([',', '"']) {
            format!("\"{}\"", tr.label.replace('"', "\"\""))
        } else {
            tr.label.clone()
        };
        for p in &tr.points {
            let _ = writeln!(
                csv,
                "{label},{},{},{},{},{}",
                p.t, p.value, p.lower, p.upper, p.at_risk
            );
        }
    }
    (svg, csv)
}

/// Writes `out` (SVG) and the sibling `.csv` of plotted points.
pub fn emit_plot(curves: &[SurvivalCurve64], style: PlotStyle, out: &Path) -> Result<()> {
    if curves.is_empty() {
        return Err(hazardlab_core::Error::Invalid("nothing to plot".into()));
    }
    let (svg, csv) = render(curves, style);
    fs::write(out, svg)?;
    fs::write(out.with_extension("csv"), csv)?;
    Ok(())
}

/// Forest plot of hazard ratios with confidence intervals on a log axis.
pub fn emit_hazard_ratio_plot(fit: &CoxFit64, out: &Path) -> Result<()> {
    let p = fit.hazard_ratios.len();
    let lows = fit.ci_lower.iter().chain(&fit.hazard_ratios).copied();
    let highs = fit.ci_upper.iter().chain(&fit.hazard_ratios).copied();
    let lo = lows
        .filter(|v| *v > 0.0)
        .fold(1.0, f64::min)
        .log10()
        .floor();
    let hi = highs
        .filter(|v| v.is_finite())
        .fold(1.0, f64::max)
        .log10()
        .ceil();
    let (lo, hi) = if hi > lo {
        (lo, hi)
    } else {
        (lo - 1.0, hi + 1.0)
    };
    let left = 110.0;
    let right = WIDTH - 40.0;
    let x = |v: f64| {
        left + (right - left) * ((v.max(10f64.powf(lo)).log10() - lo) / (hi - lo)).min(1.0)
    };
    let row_h = 32.0;
    let height = TOP + BOTTOM + row_h * p.max(1) as f64;

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{height}" viewBox="0 0 {WIDTH} {height}" font-family="sans-serif">"#
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let axis_y = height - BOTTOM;
    let mut e = lo;
    while e <= hi {
        let xv = x(10f64.powf(e));
        let _ = writeln!(
            svg,
            r##"<line x1="{xv:.2}" y1="{TOP:.2}" x2="{xv:.2}" y2="{axis_y:.2}" stroke="#ddd"/><text x="{xv:.2}" y="{:.2}" font-size="11" text-anchor="middle">{}</text>"##,
            axis_y + 16.0,
            sig(10f64.powf(e), 6)
        );
        e += 1.0;
    }
    let one = x(1.0);
    let _ = writeln!(
        svg,
        r##"<line x1="{one:.2}" y1="{TOP:.2}" x2="{one:.2}" y2="{axis_y:.2}" stroke="#444" stroke-dasharray="4 3"/>"##
    );
    for k in 0..p {
        let y = TOP + row_h * (k as f64 + 0.5);
        let _ = writeln!(
            svg,
            r##"<g class="covariate"><text x="{:.2}" y="{:.2}" font-size="12" text-anchor="end">{}</text><line x1="{:.2}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="#1f77b4" stroke-width="2"/><rect x="{:.2}" y="{:.2}" width="8" height="8" fill="#1f77b4"/></g>"##,
            left - 10.0,
            y + 4.0,
            escape(&fit.covariate_names[k]),
            x(fit.ci_lower[k]),
            x(fit.ci_upper[k]),
            x(fit.hazard_ratios[k]) - 4.0,
            y - 4.0
        );
    }
    let _ = writeln!(
        svg,
        r#"<text x="{:.2}" y="{:.2}" font-size="13" text-anchor="middle">hazard ratio (log scale)</text>"#,
        (left + right) / 2.0,
        height - 14.0
    );
    svg.push_str("</svg>\n");
    fs::write(out, svg)?;
    Ok(())
}
