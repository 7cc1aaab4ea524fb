//! Minimal SVG rendering for analysis outputs.

use std::fmt::Write;

use errp_bandit::types::Matrix;

const W: f64 = 720.0;
const H: f64 = 420.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 130.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 50.0;

pub struct Series<'a> {
    pub name: &'a str,
    pub values: &'a [f64],
    pub color: &'a str,
}

fn range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    if !lo.is_finite() {
        (-1.0, 1.0)
    } else if hi - lo < 1e-12 {
        (lo - 1.0, hi + 1.0)
    } else {
        (lo, hi)
    }
}

struct Frame {
    x: (f64, f64),
    y: (f64, f64),
}

impl Frame {
    fn px(&self, x: f64) -> f64 {
        LEFT + (x - self.x.0) / (self.x.1 - self.x.0) * (W - LEFT - RIGHT)
    }

    fn py(&self, y: f64) -> f64 {
        H - BOTTOM - (y - self.y.0) / (self.y.1 - self.y.0) * (H - TOP - BOTTOM)
    }
}

fn open(svg: &mut String, title: &str) {
    let _ = write!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
    );
    let _ = write!(svg, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = write!(svg, r#"<text x="{}" y="22" text-anchor="middle" font-size="14">{}</text>"#, W / 2.0, escape(title));
}

fn axes(svg: &mut String, f: &Frame, xlabel: &str, ylabel: &str) {
    let (x0, x1, y0, y1) = (LEFT, W - RIGHT, TOP, H - BOTTOM);
    let _ = write!(svg, r#"<rect x="{x0}" y="{y0}" width="{}" height="{}" fill="none" stroke="black"/>"#, x1 - x0, y1 - y0);
    for i in 0..=4 {
        let xv = f.x.0 + (f.x.1 - f.x.0) * i as f64 / 4.0;
        let yv = f.y.0 + (f.y.1 - f.y.0) * i as f64 / 4.0;
        let _ = write!(svg, r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{xv:.2}</text>"#, f.px(xv), y1 + 16.0);
        let _ = write!(svg, r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{yv:.2}</text>"#, x0 - 6.0, f.py(yv) + 4.0);
    }
    let _ = write!(svg, r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#, (x0 + x1) / 2.0, H - 10.0, escape(xlabel));
    let _ = write!(
        svg,
        r#"<text x="16" y="{:.1}" text-anchor="middle" transform="rotate(-90 16 {:.1})">{}</text>"#,
        (y0 + y1) / 2.0,
        (y0 + y1) / 2.0,
        escape(ylabel)
    );
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Line plot with optional shading of flagged x positions.
pub fn line_plot(title: &str, x: &[f64], series: &[Series], shade: Option<&[bool]>, xlabel: &str, ylabel: &str) -> String {
    let f = Frame {
        x: range(x.iter().copied()),
        y: range(series.iter().flat_map(|s| s.values.iter().copied())),
    };
    let mut svg = String::new();
    open(&mut svg, title);
    if let Some(mask) = shade {
        let dx = if x.len() > 1 { (x[1] - x[0]).abs() } else { 0.0 };
        for (xi, _) in x.iter().zip(mask).filter(|(_, m)| **m) {
            let (a, b) = (f.px(xi - dx / 2.0), f.px(xi + dx / 2.0));
            let _ = write!(
                svg,
                r##"<rect x="{a:.2}" y="{TOP}" width="{:.2}" height="{}" fill="#dddddd"/>"##,
                (b - a).max(0.5),
                H - TOP - BOTTOM
            );
        }
    }
    if f.y.0 < 0.0 && f.y.1 > 0.0 {
        let _ = write!(svg, r##"<line x1="{LEFT}" x2="{}" y1="{y:.2}" y2="{y:.2}" stroke="#999999"/>"##, W - RIGHT, y = f.py(0.0));
    }
    for (k, s) in series.iter().enumerate() {
        let points: Vec<String> = x
            .iter()
            .zip(s.values)
            .map(|(xv, yv)| format!("{:.2},{:.2}", f.px(*xv), f.py(*yv)))
            .collect();
        let _ = write!(svg, r#"<polyline fill="none" stroke="{}" stroke-width="1.5" points="{}"/>"#, s.color, points.join(" "));
        let ly = TOP + 14.0 + 18.0 * k as f64;
        let _ = write!(svg, r#"<line x1="{}" x2="{}" y1="{ly}" y2="{ly}" stroke="{}" stroke-width="2"/>"#, W - RIGHT + 10.0, W - RIGHT + 30.0, s.color);
        let _ = write!(svg, r#"<text x="{}" y="{}">{}</text>"#, W - RIGHT + 36.0, ly + 4.0, escape(s.name));
    }
    axes(&mut svg, &f, xlabel, ylabel);
    svg.push_str("</svg>\n");
    svg
}

/// Blue-white-red for values in [-1, 1].
fn diverging(t: f64) -> (u8, u8, u8) {
    let t = t.clamp(-1.0, 1.0);
    let fade = |c: f64| (255.0 * (1.0 - c)).round() as u8;
    if t >= 0.0 {
        (255, fade(t), fade(t))
    } else {
        (fade(-t), fade(-t), 255)
    }
}

/// Rows of `m` run along `y` (bottom to top), columns along `x`. The colour
/// scale is symmetric around zero.
pub fn heatmap(title: &str, x: &[f64], y: &[f64], m: &Matrix, xlabel: &str, ylabel: &str, unit: &str) -> String {
    let f = Frame {
        x: range(x.iter().copied()),
        y: range(y.iter().copied()),
    };
    let limit = m.data().iter().filter(|v| v.is_finite()).fold(0.0f64, |a, v| a.max(v.abs())).max(1e-12);
    let cell_w = (W - LEFT - RIGHT) / x.len().max(1) as f64;
    let cell_h = (H - TOP - BOTTOM) / y.len().max(1) as f64;
    let mut svg = String::new();
    open(&mut svg, title);
    for r in 0..m.rows() {
        for c in 0..m.cols() {
            let (red, green, blue) = diverging(m.get(r, c) / limit);
            let _ = write!(
                svg,
                r#"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="rgb({red},{green},{blue})"/>"#,
                LEFT + c as f64 * cell_w,
                H - BOTTOM - (r + 1) as f64 * cell_h,
                cell_w + 0.05,
                cell_h + 0.05
            );
        }
    }
    for (k, v) in [1.0, 0.0, -1.0].iter().enumerate() {
        let (red, green, blue) = diverging(*v);
        let ly = TOP + 10.0 + 22.0 * k as f64;
        let _ = write!(svg, r#"<rect x="{}" y="{ly}" width="16" height="16" fill="rgb({red},{green},{blue})" stroke="black"/>"#, W - RIGHT + 10.0);
        let _ = write!(svg, r#"<text x="{}" y="{}">{:.2} {}</text>"#, W - RIGHT + 32.0, ly + 12.0, v * limit, escape(unit));
    }
    axes(&mut svg, &f, xlabel, ylabel);
    svg.push_str("</svg>\n");
    svg
}
