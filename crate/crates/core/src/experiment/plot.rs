//! Minimal SVG views of the CSV reports: polylines, scatters and heatmaps
//! with plain axes.

use std::fmt::Write as _;

use ndarray::Array2;

const W: f64 = 640.0;
const H: f64 = 420.0;
const PAD_L: f64 = 64.0;
const PAD_R: f64 = 140.0;
const PAD_T: f64 = 36.0;
const PAD_B: f64 = 48.0;
const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf",
];

/// A named set of `(x, y)` points.
pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
}

impl Series {
    pub fn new(name: impl Into<String>, points: Vec<(f64, f64)>) -> Self {
        Series {
            name: name.into(),
            points,
        }
    }
}

struct Frame {
    x: (f64, f64),
    y: (f64, f64),
}

impl Frame {
    fn fit(series: &[Series]) -> Frame {
        let finite = series
            .iter()
            .flat_map(|s| s.points.iter())
            .filter(|(x, y)| x.is_finite() && y.is_finite());
        let (mut x0, mut x1, mut y0, mut y1) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
        for &(x, y) in finite {
            x0 = x0.min(x);
            x1 = x1.max(x);
            y0 = y0.min(y);
            y1 = y1.max(y);
        }
        if x0 > x1 {
            (x0, x1, y0, y1) = (0.0, 1.0, 0.0, 1.0);
        }
        let widen = |lo: f64, hi: f64| {
            if hi - lo < 1e-12 {
                (lo - 0.5, hi + 0.5)
            } else {
                (lo, hi)
            }
        };
        Frame {
            x: widen(x0, x1),
            y: widen(y0, y1),
        }
    }

    fn px(&self, x: f64) -> f64 {
        PAD_L + (x - self.x.0) / (self.x.1 - self.x.0) * (W - PAD_L - PAD_R)
    }

    fn py(&self, y: f64) -> f64 {
        H - PAD_B - (y - self.y.0) / (self.y.1 - self.y.0) * (H - PAD_T - PAD_B)
    }
}

fn open(title: &str, out: &mut String) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(out, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(
        out,
        r#"<text x="{}" y="20" text-anchor="middle" font-size="13">{}</text>"#,
        W / 2.0,
        escape(title)
    );
}

fn axes(frame: &Frame, xlabel: &str, ylabel: &str, out: &mut String) {
    let (l, r, t, b) = (PAD_L, W - PAD_R, PAD_T, H - PAD_B);
    let _ = writeln!(
        out,
        r#"<path d="M{l},{t} L{l},{b} L{r},{b}" fill="none" stroke="black"/>"#
    );
    for k in 0..=4 {
        let f = k as f64 / 4.0;
        let xv = frame.x.0 + f * (frame.x.1 - frame.x.0);
        let yv = frame.y.0 + f * (frame.y.1 - frame.y.0);
        let (xp, yp) = (frame.px(xv), frame.py(yv));
        let _ = writeln!(
            out,
            r#"<line x1="{xp:.1}" y1="{b}" x2="{xp:.1}" y2="{}" stroke="black"/><text x="{xp:.1}" y="{}" text-anchor="middle">{}</text>"#,
            b + 4.0,
            b + 16.0,
            tick(xv)
        );
        let _ = writeln!(
            out,
            r#"<line x1="{}" y1="{yp:.1}" x2="{l}" y2="{yp:.1}" stroke="black"/><text x="{}" y="{:.1}" text-anchor="end">{}</text>"#,
            l - 4.0,
            l - 6.0,
            yp + 4.0,
            tick(yv)
        );
    }
    let _ = writeln!(
        out,
        r#"<text x="{:.1}" y="{}" text-anchor="middle">{}</text>"#,
        (l + r) / 2.0,
        H - 12.0,
        escape(xlabel)
    );
    let _ = writeln!(
        out,
        r#"<text x="14" y="{:.1}" text-anchor="middle" transform="rotate(-90 14 {:.1})">{}</text>"#,
        (t + b) / 2.0,
        (t + b) / 2.0,
        escape(ylabel)
    );
}

fn legend(series: &[Series], out: &mut String) {
    for (i, s) in series.iter().enumerate() {
        let y = PAD_T + 14.0 * i as f64 + 6.0;
        let x = W - PAD_R + 12.0;
        let _ = writeln!(
            out,
            r#"<rect x="{x}" y="{}" width="10" height="10" fill="{}"/><text x="{}" y="{}">{}</text>"#,
            y - 8.0,
            PALETTE[i % PALETTE.len()],
            x + 14.0,
            y + 1.0,
            escape(&s.name)
        );
    }
}

fn tick(v: f64) -> String {
    if v != 0.0 && (v.abs() >= 1e4 || v.abs() < 1e-2) {
        format!("{v:.2e}")
    } else {
        format!("{v:.3}")
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// One polyline per series.
pub fn line_plot(title: &str, xlabel: &str, ylabel: &str, series: &[Series]) -> String {
    let frame = Frame::fit(series);
    let mut out = String::new();
    open(title, &mut out);
    axes(&frame, xlabel, ylabel, &mut out);
    for (i, s) in series.iter().enumerate() {
        let pts: Vec<String> = s
            .points
            .iter()
            .filter(|(x, y)| x.is_finite() && y.is_finite())
            .map(|&(x, y)| format!("{:.2},{:.2}", frame.px(x), frame.py(y)))
            .collect();
        let _ = writeln!(
            out,
            r#"<polyline points="{}" fill="none" stroke="{}" stroke-width="1.5"/>"#,
            pts.join(" "),
            PALETTE[i % PALETTE.len()]
        );
    }
    legend(series, &mut out);
    out.push_str("</svg>\n");
    out
}

/// One colour per series; optional `y = x` reference line.
pub fn scatter_plot(
    title: &str,
    xlabel: &str,
    ylabel: &str,
    series: &[Series],
    diagonal: bool,
) -> String {
    let mut frame = Frame::fit(series);
    if diagonal {
        let lo = frame.x.0.min(frame.y.0);
        let hi = frame.x.1.max(frame.y.1);
        frame.x = (lo, hi);
        frame.y = (lo, hi);
    }
    let mut out = String::new();
    open(title, &mut out);
    axes(&frame, xlabel, ylabel, &mut out);
    if diagonal {
        let _ = writeln!(
            out,
            r#"<line x1="{:.1}" y1="{:.1}" x2="{:.1}" y2="{:.1}" stroke="gray" stroke-dasharray="4 3"/>"#,
            frame.px(frame.x.0),
            frame.py(frame.x.0),
            frame.px(frame.x.1),
            frame.py(frame.x.1)
        );
    }
    for (i, s) in series.iter().enumerate() {
        let colour = PALETTE[i % PALETTE.len()];
        for &(x, y) in s.points.iter().filter(|(x, y)| x.is_finite() && y.is_finite()) {
            let _ = writeln!(
                out,
                r#"<circle cx="{:.2}" cy="{:.2}" r="1.6" fill="{colour}" fill-opacity="0.6"/>"#,
                frame.px(x),
                frame.py(y)
            );
        }
    }
    legend(series, &mut out);
    out.push_str("</svg>\n");
    out
}

/// Grayscale-to-blue cells over `[min, max]` of the matrix.
pub fn heatmap(title: &str, m: &Array2<f64>) -> String {
    let (rows, cols) = m.dim();
    let lo = m.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = m.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = if hi - lo > 0.0 { hi - lo } else { 1.0 };
    let side = (H - PAD_T - PAD_B).min(W - PAD_L - PAD_R);
    let (cw, ch) = (side / cols.max(1) as f64, side / rows.max(1) as f64);
    let mut out = String::new();
    open(title, &mut out);
    for ((i, j), v) in m.indexed_iter() {
        let f = ((v - lo) / span).clamp(0.0, 1.0);
        let shade = (255.0 * (1.0 - f)).round() as u8;
        let _ = writeln!(
            out,
            r#"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="rgb({shade},{shade},255)"/>"#,
            PAD_L + j as f64 * cw,
            PAD_T + i as f64 * ch,
            cw + 0.05,
            ch + 0.05
        );
    }
    let _ = writeln!(
        out,
        r#"<text x="{}" y="{}">min {} max {}</text>"#,
        PAD_L + side + 12.0,
        PAD_T + 12.0,
        tick(lo),
        tick(hi)
    );
    out.push_str("</svg>\n");
    out
}
