//! Deterministic SVG charts.

use std::fmt::Write as _;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlotKind {
    /// log10 rank against log10 value.
    RankLogLog,
    /// log10 rank against value.
    RankLogLinear,
    /// Bars over log10 amount bins.
    Histogram,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Overlay {
    /// Fitted curve in plot coordinates.
    Curve {
        label: String,
        points: Vec<(f64, f64)>,
    },
    /// Vertical marker at an x position in plot coordinates.
    Marker { label: String, x: f64 },
}

pub const MAX_OVERLAYS: usize = 8;

#[derive(Debug, Clone, PartialEq)]
pub struct PlotSpec {
    pub kind: PlotKind,
    pub width: u32,
    pub height: u32,
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub overlays: Vec<Overlay>,
}

impl PlotSpec {
    pub fn new(kind: PlotKind, title: &str, x_label: &str, y_label: &str) -> Self {
        PlotSpec {
            kind,
            width: 720,
            height: 480,
            title: title.into(),
            x_label: x_label.into(),
            y_label: y_label.into(),
            overlays: vec![],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PlotError(pub String);

impl std::fmt::Display for PlotError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

const COLORS: [&str; MAX_OVERLAYS] = [
    "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#17becf", "#7f7f7f",
];

const MARGIN_L: f64 = 70.0;
const MARGIN_R: f64 = 20.0;
const MARGIN_T: f64 = 40.0;
const MARGIN_B: f64 = 55.0;

/// Formats with at most 6 significant digits and no trailing zeros.
pub fn num(v: f64) -> String {
    if !v.is_finite() {
        return "0".into();
    }
    if v == 0.0 {
        return "0".into();
    }
    let mag = v.abs().log10().floor() as i32;
    let decimals = (5 - mag).clamp(0, 12) as usize;
    let mut s = format!("{v:.decimals$}");
    if s.contains('.') {
        while s.ends_with('0') {
            s.pop();
        }
        if s.ends_with('.') {
            s.pop();
        }
    }
    if s == "-0" {
        s = "0".into();
    }
    s
}

pub fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            c if (c as u32) < 0x20 && c != '\t' && c != '\n' => {}
            c => out.push(c),
        }
    }
    out
}

struct Frame {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
    w: f64,
    h: f64,
}

impl Frame {
    fn px(&self, x: f64) -> f64 {
        MARGIN_L + (x - self.x0) / (self.x1 - self.x0) * (self.w - MARGIN_L - MARGIN_R)
    }

    fn py(&self, y: f64) -> f64 {
        self.h - MARGIN_B - (y - self.y0) / (self.y1 - self.y0) * (self.h - MARGIN_T - MARGIN_B)
    }
}

#[allow(clippy::neg_cmp_op_on_partial_ord)]
fn padded(lo: f64, hi: f64) -> (f64, f64) {
    if !(hi > lo) {
        let c = if lo.is_finite() { lo } else { 0.0 };
        return (c - 1.0, c + 1.0);
    }
    let pad = (hi - lo) * 0.05;
    (lo - pad, hi + pad)
}

fn extent(values: impl Iterator<Item = f64>) -> (f64, f64) {
    values
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| {
            (a.min(v), b.max(v))
        })
}

/// Tick positions: integers for log axes, a 1-2-5 step otherwise.
fn ticks(lo: f64, hi: f64, integer: bool) -> Vec<f64> {
    let step = if integer {
        ((hi - lo) / 8.0).ceil().max(1.0)
    } else {
        let raw = (hi - lo) / 6.0;
        let p = 10f64.powf(raw.log10().floor());
        let m = raw / p;
        p * if m <= 1.0 {
            1.0
        } else if m <= 2.0 {
            2.0
        } else if m <= 5.0 {
            5.0
        } else {
            10.0
        }
    };
    let first = (lo / step).ceil() as i64;
    let last = (hi / step).floor() as i64;
    (first..=last).map(|i| i as f64 * step).collect()
}

fn tick_label(v: f64, log: bool) -> String {
    if log {
        format!("1e{}", v.round() as i64)
    } else {
        num(v)
    }
}

/// Renders `points` (plot coordinates) for rank kinds, or histogram bars given
/// as `(bin_low, bin_high, count)` through `bars`.
pub fn render(
    spec: &PlotSpec,
    points: &[(f64, f64)],
    bars: &[(f64, f64, u64)],
) -> Result<String, PlotError> {
    if spec.width == 0 || spec.height == 0 {
        return Err(PlotError("plot width and height must be positive".into()));
    }
    if spec.overlays.len() > MAX_OVERLAYS {
        return Err(PlotError(format!(
            "at most {MAX_OVERLAYS} overlays, got {}",
            spec.overlays.len()
        )));
    }
    let (w, h) = (spec.width as f64, spec.height as f64);

    let curve_pts = spec.overlays.iter().flat_map(|o| match o {
        Overlay::Curve { points, .. } => points.clone(),
        Overlay::Marker { .. } => vec![],
    });
    let markers = spec.overlays.iter().filter_map(|o| match o {
        Overlay::Marker { x, .. } => Some(*x),
        _ => None,
    });
    let (xs, ys): (Vec<f64>, Vec<f64>) = match spec.kind {
        PlotKind::Histogram => {
            let mut xs: Vec<f64> = bars.iter().flat_map(|b| [b.0, b.1]).collect();
            xs.extend(markers);
            (xs, bars.iter().map(|b| b.2 as f64).chain([0.0]).collect())
        }
        _ => {
            let all: Vec<(f64, f64)> = points.iter().copied().chain(curve_pts).collect();
            let mut xs: Vec<f64> = all.iter().map(|p| p.0).collect();
            xs.extend(markers);
            (xs, all.iter().map(|p| p.1).collect())
        }
    };
    let (x0, x1) = extent(xs.into_iter());
    let (y0, y1) = extent(ys.into_iter());
    let (x0, x1) = if spec.kind == PlotKind::Histogram && x1 > x0 {
        (x0, x1)
    } else {
        padded(x0, x1)
    };
    let (y0, y1) = if spec.kind == PlotKind::Histogram {
        (0.0, if y1 > 0.0 { y1 * 1.05 } else { 1.0 })
    } else {
        padded(y0, y1)
    };
    let f = Frame {
        x0,
        x1,
        y0,
        y1,
        w,
        h,
    };

    let mut s = String::new();
    let _ = writeln!(s, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{}" height="{}" viewBox="0 0 {} {}" font-family="sans-serif" font-size="12">"#,
        spec.width, spec.height, spec.width, spec.height
    );
    let _ = writeln!(
        s,
        r#"<rect x="0" y="0" width="{}" height="{}" fill="white"/>"#,
        spec.width, spec.height
    );
    let _ = writeln!(
        s,
        r#"<text x="{}" y="22" text-anchor="middle" font-size="15">{}</text>"#,
        num(w / 2.0),
        escape(&spec.title)
    );

    let (left, right, top, bottom) = (MARGIN_L, w - MARGIN_R, MARGIN_T, h - MARGIN_B);
    let _ = writeln!(
        s,
        r#"<rect x="{}" y="{}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        num(left),
        num(top),
        num(right - left),
        num(bottom - top)
    );

    let x_log = spec.kind != PlotKind::Histogram;
    let y_log = spec.kind == PlotKind::RankLogLog;
    for t in ticks(x0, x1, x_log) {
        let px = num(f.px(t));
        let _ = writeln!(
            s,
            r#"<line x1="{px}" y1="{}" x2="{px}" y2="{}" stroke="black"/><text x="{px}" y="{}" text-anchor="middle">{}</text>"#,
            num(bottom),
            num(bottom + 5.0),
            num(bottom + 18.0),
            escape(&tick_label(t, true))
        );
    }
    for t in ticks(y0, y1, y_log) {
        let py = num(f.py(t));
        let _ = writeln!(
            s,
            r#"<line x1="{}" y1="{py}" x2="{}" y2="{py}" stroke="black"/><text x="{}" y="{py}" text-anchor="end" dominant-baseline="middle">{}</text>"#,
            num(left - 5.0),
            num(left),
            num(left - 8.0),
            escape(&tick_label(t, y_log))
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
        num((left + right) / 2.0),
        num(h - 12.0),
        escape(&spec.x_label)
    );
    let _ = writeln!(
        s,
        r#"<text x="16" y="{}" text-anchor="middle" transform="rotate(-90 16 {})">{}</text>"#,
        num((top + bottom) / 2.0),
        num((top + bottom) / 2.0),
        escape(&spec.y_label)
    );

    match spec.kind {
        PlotKind::Histogram => {
            for (lo, hi, c) in bars {
                let (px0, px1) = (f.px(*lo), f.px(*hi));
                let py = f.py(*c as f64);
                let _ = writeln!(
                    s,
                    r##"<rect x="{}" y="{}" width="{}" height="{}" fill="#1f77b4" stroke="white"/>"##,
                    num(px0),
                    num(py),
                    num(px1 - px0),
                    num(bottom - py)
                );
            }
        }
        _ => {
            if !points.is_empty() {
                let _ = writeln!(
                    s,
                    r##"<polyline fill="none" stroke="#1f77b4" stroke-width="1.5" points="{}"/>"##,
                    polyline(&f, points)
                );
            }
        }
    }

    for (i, o) in spec.overlays.iter().enumerate() {
        let color = COLORS[i];
        let label_y = num(top + 16.0 + 14.0 * i as f64);
        match o {
            Overlay::Curve { label, points } => {
                let _ = writeln!(
                    s,
                    r#"<polyline fill="none" stroke="{color}" stroke-width="2" points="{}"/>"#,
                    polyline(&f, points)
                );
                let _ = writeln!(
                    s,
                    r#"<text x="{}" y="{label_y}" text-anchor="end" fill="{color}">{}</text>"#,
                    num(right - 6.0),
                    escape(label)
                );
            }
            Overlay::Marker { label, x } => {
                let px = num(f.px(*x));
                let _ = writeln!(
                    s,
                    r#"<line x1="{px}" y1="{}" x2="{px}" y2="{}" stroke="{color}" stroke-dasharray="5,4"/>"#,
                    num(top),
                    num(bottom)
                );
                let _ = writeln!(
                    s,
                    r#"<text x="{}" y="{label_y}" text-anchor="end" fill="{color}">{}</text>"#,
                    num(right - 6.0),
                    escape(label)
                );
            }
        }
    }
    s.push_str("</svg>\n");
    Ok(s)
}

fn polyline(f: &Frame, points: &[(f64, f64)]) -> String {
    let mut out = String::with_capacity(points.len() * 14);
    for (i, (x, y)) in points
        .iter()
        .filter(|(x, y)| x.is_finite() && y.is_finite())
        .enumerate()
    {
        if i > 0 {
            out.push(' ');
        }
        let _ = write!(out, "{},{}", num(f.px(*x)), num(f.py(*y)));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn six_significant_digits() {
        assert_eq!(num(1.234567891), "1.23457");
        assert_eq!(num(123456.789), "123457");
        assert_eq!(num(0.000123456789), "0.000123457");
        assert_eq!(num(100.0), "100");
        assert_eq!(num(-0.0000001), "-0.0000001");
        assert_eq!(num(0.0), "0");
        assert_eq!(num(-1e-13), "0");
    }

    #[test]
    fn escaping() {
        assert_eq!(escape(r#"A&B <"c">"#), "A&amp;B &lt;&quot;c&quot;&gt;");
    }

    #[test]
    fn rejects_bad_specs() {
        let mut spec = PlotSpec::new(PlotKind::RankLogLog, "t", "x", "y");
        spec.width = 0;
        assert!(render(&spec, &[], &[]).is_err());
        let mut spec = PlotSpec::new(PlotKind::RankLogLog, "t", "x", "y");
        spec.overlays = (0..9)
            .map(|i| Overlay::Marker {
                label: i.to_string(),
                x: 0.0,
            })
            .collect();
        assert!(render(&spec, &[], &[]).is_err());
    }

    #[test]
    fn deterministic_and_sized() {
        let spec = PlotSpec::new(PlotKind::RankLogLog, "Suppliers & counts", "rank", "count");
        let pts: Vec<(f64, f64)> = (1..50)
            .map(|r| ((r as f64).log10(), 2.0 - (r as f64).log10()))
            .collect();
        let a = render(&spec, &pts, &[]).unwrap();
        assert_eq!(a, render(&spec, &pts, &[]).unwrap());
        assert!(a.contains(r#"width="720" height="480""#));
        assert!(a.contains("Suppliers &amp; counts"));
    }
}
