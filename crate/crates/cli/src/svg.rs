//! Static SVG charts written as plain text.

use std::fmt::Write;

use disagreement::stats::CrossCorrelogram;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 400.0;
const LEFT: f64 = 60.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 60.0;
const BOTTOM: f64 = 50.0;

const COLORS: [&str; 4] = ["#1f4e79", "#b8312f", "#2e7d32", "#6a1b9a"];

pub fn escape(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for c in text.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
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
}

impl Frame {
    fn new(x0: f64, x1: f64, y0: f64, y1: f64) -> Self {
        let (y0, y1) = if (y1 - y0).abs() < 1e-12 { (y0 - 1.0, y1 + 1.0) } else { (y0, y1) };
        Frame { x0, x1, y0, y1 }
    }

    fn x(&self, v: f64) -> f64 {
        LEFT + (v - self.x0) / (self.x1 - self.x0) * (WIDTH - LEFT - RIGHT)
    }

    fn y(&self, v: f64) -> f64 {
        HEIGHT - BOTTOM - (v - self.y0) / (self.y1 - self.y0) * (HEIGHT - TOP - BOTTOM)
    }
}

fn header(out: &mut String, title: &str, subtitle: &str) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif">"#
    );
    let _ = writeln!(out, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(out, r#"<text x="{}" y="24" font-size="15" text-anchor="middle">{}</text>"#, WIDTH / 2.0, escape(title));
    let _ = writeln!(out, r##"<text x="{}" y="42" font-size="11" text-anchor="middle" fill="#555">{}</text>"##, WIDTH / 2.0, escape(subtitle));
}

fn axes(out: &mut String, frame: &Frame, x_label: &str) {
    let (xa, xb) = (frame.x(frame.x0), frame.x(frame.x1));
    let (ya, yb) = (frame.y(frame.y0), frame.y(frame.y1));
    let _ = writeln!(out, r##"<g stroke="#333" stroke-width="1">"##);
    let _ = writeln!(out, r#"<line x1="{xa:.2}" y1="{ya:.2}" x2="{xb:.2}" y2="{ya:.2}"/>"#);
    let _ = writeln!(out, r#"<line x1="{xa:.2}" y1="{ya:.2}" x2="{xa:.2}" y2="{yb:.2}"/>"#);
    if frame.y0 < 0.0 && frame.y1 > 0.0 {
        let z = frame.y(0.0);
        let _ = writeln!(out, r#"<line x1="{xa:.2}" y1="{z:.2}" x2="{xb:.2}" y2="{z:.2}" stroke-dasharray="3,3"/>"#);
    }
    let _ = writeln!(out, "</g>");
    for i in 0..=4 {
        let v = frame.y0 + (frame.y1 - frame.y0) * i as f64 / 4.0;
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="{:.2}" font-size="10" text-anchor="end">{:.3}</text>"#,
            LEFT - 6.0,
            frame.y(v) + 3.0,
            v
        );
    }
    let _ = writeln!(
        out,
        r#"<text x="{:.2}" y="{:.2}" font-size="11" text-anchor="middle">{}</text>"#,
        (xa + xb) / 2.0,
        HEIGHT - 12.0,
        escape(x_label)
    );
}

/// Bar chart of a correlogram; the title carries the contemporaneous value.
pub fn correlogram(country: &str, a_label: &str, b_label: &str, ccf: &CrossCorrelogram) -> String {
    let k = ccf.max_lag as f64;
    let frame = Frame::new(-k - 0.5, k + 0.5, -1.0, 1.0);
    let contemporaneous = ccf.at(0).unwrap_or(f64::NAN);
    let mut out = String::new();
    header(
        &mut out,
        &format!("{country}: {a_label} vs lagged {b_label} ({contemporaneous:.3})"),
        &format!("value(k) = corr({a_label}_t, {b_label}_t+k); contemporaneous correlation in brackets"),
    );
    axes(&mut out, &frame, "k");
    let half = 0.35;
    let _ = writeln!(out, r#"<g fill="{}">"#, COLORS[0]);
    for (lag, v) in ccf.lags() {
        let x = frame.x(lag as f64 - half);
        let w = frame.x(lag as f64 + half) - x;
        let (top, bottom) = (frame.y(v.max(0.0)), frame.y(v.min(0.0)));
        let _ = writeln!(out, r#"<rect x="{x:.2}" y="{top:.2}" width="{w:.2}" height="{:.2}"/>"#, bottom - top);
    }
    let _ = writeln!(out, "</g>");
    for lag in ccf.lags().map(|(l, _)| l).filter(|l| l % 3 == 0) {
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="{:.2}" font-size="10" text-anchor="middle">{lag}</text>"#,
            frame.x(lag as f64),
            frame.y(-1.0) + 14.0
        );
    }
    out.push_str("</svg>\n");
    out
}

/// One response path with its band.
pub struct BandedPath<'a> {
    pub label: &'a str,
    pub point: &'a [f64],
    pub lower: &'a [f64],
    pub upper: &'a [f64],
}

/// Overlaid impulse responses with shaded bands.
pub fn impulse_responses(title: &str, subtitle: &str, paths: &[BandedPath<'_>]) -> String {
    let horizon = paths.iter().map(|p| p.point.len()).max().unwrap_or(1).saturating_sub(1).max(1);
    let values = paths.iter().flat_map(|p| p.lower.iter().chain(p.upper).chain(p.point));
    let (lo, hi) = values.fold((0.0_f64, 0.0_f64), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let pad = 0.05 * (hi - lo);
    let frame = Frame::new(0.0, horizon as f64, lo - pad, hi + pad);
    let mut out = String::new();
    header(&mut out, title, subtitle);
    axes(&mut out, &frame, "months after shock");
    for (i, path) in paths.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let mut band = String::new();
        for (h, v) in path.upper.iter().enumerate() {
            let _ = write!(band, "{:.2},{:.2} ", frame.x(h as f64), frame.y(*v));
        }
        for (h, v) in path.lower.iter().enumerate().rev() {
            let _ = write!(band, "{:.2},{:.2} ", frame.x(h as f64), frame.y(*v));
        }
        let _ = writeln!(out, r#"<polygon points="{}" fill="{color}" fill-opacity="0.18" stroke="none"/>"#, band.trim_end());
        let line: Vec<String> = path
            .point
            .iter()
            .enumerate()
            .map(|(h, v)| format!("{:.2},{:.2}", frame.x(h as f64), frame.y(*v)))
            .collect();
        let _ = writeln!(out, r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="2"/>"#, line.join(" "));
        let ly = TOP + 14.0 * i as f64;
        let _ = writeln!(
            out,
            r#"<line x1="{:.2}" y1="{ly:.2}" x2="{:.2}" y2="{ly:.2}" stroke="{color}" stroke-width="2"/>"#,
            WIDTH - 170.0,
            WIDTH - 150.0
        );
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="{:.2}" font-size="11">{}</text>"#,
            WIDTH - 145.0,
            ly + 4.0,
            escape(path.label)
        );
    }
    for h in (0..=horizon).step_by(6) {
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="{:.2}" font-size="10" text-anchor="middle">{h}</text>"#,
            frame.x(h as f64),
            HEIGHT - BOTTOM + 14.0
        );
    }
    out.push_str("</svg>\n");
    out
}
