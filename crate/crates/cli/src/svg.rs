//! Minimal static SVG charts: line/marker plots and heatmaps.

use std::fmt::Write;

const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf",
];

pub const PANEL_WIDTH: f64 = 640.0;
pub const PANEL_HEIGHT: f64 = 360.0;
const MARGIN_LEFT: f64 = 64.0;
const MARGIN_RIGHT: f64 = 150.0;
const MARGIN_TOP: f64 = 32.0;
const MARGIN_BOTTOM: f64 = 48.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mark {
    Line,
    Dots,
}

#[derive(Debug, Clone)]
pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
    pub mark: Mark,
}

#[derive(Debug, Clone)]
pub struct Chart {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub series: Vec<Series>,
    /// Fixed y range; fitted to the data when `None`.
    pub y_range: Option<(f64, f64)>,
    /// Horizontal reference lines.
    pub guides: Vec<f64>,
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

fn nice_step(span: f64) -> f64 {
    let raw = span / 5.0;
    let magnitude = 10f64.powf(raw.log10().floor());
    let residual = raw / magnitude;
    let nice = if residual < 1.5 {
        1.0
    } else if residual < 3.5 {
        2.0
    } else if residual < 7.5 {
        5.0
    } else {
        10.0
    };
    nice * magnitude
}

fn ticks(lo: f64, hi: f64) -> Vec<f64> {
    let step = nice_step(hi - lo);
    let mut t = (lo / step).ceil() * step;
    let mut out = Vec::new();
    while t <= hi + step * 1e-9 {
        out.push(if t.abs() < step * 1e-9 { 0.0 } else { t });
        t += step;
    }
    out
}

fn label(x: f64) -> String {
    let s = format!("{x:.3}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" {
        "0".to_string()
    } else {
        s.to_string()
    }
}

fn padded(lo: f64, hi: f64) -> (f64, f64) {
    if !(lo.is_finite() && hi.is_finite()) {
        (0.0, 1.0)
    } else if hi - lo < 1e-12 {
        (lo - 0.5, hi + 0.5)
    } else {
        let pad = 0.05 * (hi - lo);
        (lo - pad, hi + pad)
    }
}

fn bounds(values: impl Iterator<Item = f64>) -> (f64, f64) {
    values
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)))
}

struct Frame {
    left: f64,
    top: f64,
    width: f64,
    height: f64,
    x: (f64, f64),
    y: (f64, f64),
}

impl Frame {
    fn new(left: f64, top: f64, x: (f64, f64), y: (f64, f64)) -> Self {
        Self {
            left: left + MARGIN_LEFT,
            top: top + MARGIN_TOP,
            width: PANEL_WIDTH - MARGIN_LEFT - MARGIN_RIGHT,
            height: PANEL_HEIGHT - MARGIN_TOP - MARGIN_BOTTOM,
            x,
            y,
        }
    }

    fn px(&self, x: f64) -> f64 {
        self.left + (x - self.x.0) / (self.x.1 - self.x.0) * self.width
    }

    fn py(&self, y: f64) -> f64 {
        self.top + self.height - (y - self.y.0) / (self.y.1 - self.y.0) * self.height
    }

    fn axes(&self, out: &mut String, title: &str, x_label: &str, y_label: &str) {
        let (l, t, w, h) = (self.left, self.top, self.width, self.height);
        let _ = write!(
            out,
            r##"<rect x="{l:.2}" y="{t:.2}" width="{w:.2}" height="{h:.2}" fill="none" stroke="#333"/>"##
        );
        let _ = write!(
            out,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle" font-size="14">{}</text>"#,
            l + w / 2.0,
            t - 12.0,
            escape(title)
        );
        let _ = write!(
            out,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle" font-size="12">{}</text>"#,
            l + w / 2.0,
            t + h + 38.0,
            escape(x_label)
        );
        let (yx, yy) = (l - 48.0, t + h / 2.0);
        let _ = write!(
            out,
            r#"<text x="{yx:.2}" y="{yy:.2}" text-anchor="middle" font-size="12" transform="rotate(-90 {yx:.2} {yy:.2})">{}</text>"#,
            escape(y_label)
        );
        for x in ticks(self.x.0, self.x.1) {
            let px = self.px(x);
            let _ = write!(
                out,
                r##"<line x1="{px:.2}" y1="{:.2}" x2="{px:.2}" y2="{:.2}" stroke="#333"/><text x="{px:.2}" y="{:.2}" text-anchor="middle" font-size="10">{}</text>"##,
                t + h,
                t + h + 4.0,
                t + h + 16.0,
                label(x)
            );
        }
        for y in ticks(self.y.0, self.y.1) {
            let py = self.py(y);
            let _ = write!(
                out,
                r##"<line x1="{:.2}" y1="{py:.2}" x2="{l:.2}" y2="{py:.2}" stroke="#333"/><text x="{:.2}" y="{:.2}" text-anchor="end" font-size="10">{}</text>"##,
                l - 4.0,
                l - 6.0,
                py + 3.5,
                label(y)
            );
        }
    }
}

impl Chart {
    pub fn new(title: &str, x_label: &str, y_label: &str) -> Self {
        Self {
            title: title.to_string(),
            x_label: x_label.to_string(),
            y_label: y_label.to_string(),
            series: Vec::new(),
            y_range: None,
            guides: Vec::new(),
        }
    }

    pub fn series(mut self, name: impl Into<String>, points: Vec<(f64, f64)>, mark: Mark) -> Self {
        self.series.push(Series {
            name: name.into(),
            points,
            mark,
        });
        self
    }

    fn render_at(&self, left: f64, top: f64, out: &mut String) {
        let x = padded_or_exact(bounds(self.series.iter().flat_map(|s| s.points.iter().map(|p| p.0))));
        let fitted = bounds(
            self.series
                .iter()
                .flat_map(|s| s.points.iter().map(|p| p.1))
                .chain(self.guides.iter().copied()),
        );
        let y = self.y_range.unwrap_or_else(|| padded(fitted.0, fitted.1));
        let frame = Frame::new(left, top, x, y);
        frame.axes(out, &self.title, &self.x_label, &self.y_label);
        for &g in &self.guides {
            let py = frame.py(g);
            let _ = write!(
                out,
                r##"<line x1="{:.2}" y1="{py:.2}" x2="{:.2}" y2="{py:.2}" stroke="#999" stroke-dasharray="4 3"/>"##,
                frame.left,
                frame.left + frame.width
            );
        }
        for (k, series) in self.series.iter().enumerate() {
            let color = PALETTE[k % PALETTE.len()];
            let points: Vec<(f64, f64)> = series
                .points
                .iter()
                .filter(|p| p.0.is_finite() && p.1.is_finite())
                .map(|&(x, y)| (frame.px(x), frame.py(y)))
                .collect();
            match series.mark {
                Mark::Line => {
                    let path: Vec<String> = points.iter().map(|(x, y)| format!("{x:.2},{y:.2}")).collect();
                    let _ = write!(
                        out,
                        r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
                        path.join(" ")
                    );
                }
                Mark::Dots => {
                    for (x, y) in points {
                        let _ = write!(out, r#"<circle cx="{x:.2}" cy="{y:.2}" r="2" fill="{color}"/>"#);
                    }
                }
            }
            let ly = frame.top + 12.0 + 16.0 * k as f64;
            let lx = frame.left + frame.width + 12.0;
            let _ = write!(
                out,
                r#"<rect x="{lx:.2}" y="{:.2}" width="10" height="10" fill="{color}"/><text x="{:.2}" y="{ly:.2}" font-size="11">{}</text>"#,
                ly - 9.0,
                lx + 14.0,
                escape(&series.name)
            );
        }
    }

    pub fn to_svg(&self) -> String {
        stack(std::slice::from_ref(self))
    }
}

fn padded_or_exact((lo, hi): (f64, f64)) -> (f64, f64) {
    if lo.is_finite() && hi.is_finite() && hi > lo {
        (lo, hi)
    } else {
        padded(lo, hi)
    }
}

fn document(width: f64, height: f64, body: &str) -> String {
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width:.0}\" height=\"{height:.0}\" viewBox=\"0 0 {width:.0} {height:.0}\" font-family=\"sans-serif\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n{body}\n</svg>\n"
    )
}

/// Charts stacked vertically in one document.
pub fn stack(charts: &[Chart]) -> String {
    let mut body = String::new();
    for (k, chart) in charts.iter().enumerate() {
        chart.render_at(0.0, k as f64 * PANEL_HEIGHT, &mut body);
        body.push('\n');
    }
    document(PANEL_WIDTH, PANEL_HEIGHT * charts.len().max(1) as f64, &body)
}

/// `cells[row][col]`, drawn with rows bottom to top over `y` and columns
/// left to right over `x`. Colour scales linearly from 0 to the maximum.
pub struct Heatmap<'a> {
    pub title: &'a str,
    pub x_label: &'a str,
    pub y_label: &'a str,
    pub x: (f64, f64),
    pub y: (f64, f64),
    pub cells: &'a [Vec<f64>],
}

fn shade(v: f64) -> String {
    // White to dark blue.
    let v = v.clamp(0.0, 1.0);
    let r = (255.0 * (1.0 - 0.9 * v)).round() as u8;
    let g = (255.0 * (1.0 - 0.75 * v)).round() as u8;
    let b = (255.0 * (1.0 - 0.45 * v)).round() as u8;
    format!("#{r:02x}{g:02x}{b:02x}")
}

impl Heatmap<'_> {
    pub fn to_svg(&self) -> String {
        let mut body = String::new();
        let frame = Frame::new(0.0, 0.0, self.x, self.y);
        let rows = self.cells.len();
        let cols = self.cells.first().map_or(0, Vec::len);
        let max = self.cells.iter().flatten().fold(0.0f64, |m, &v| m.max(v));
        let (cw, ch) = (frame.width / cols.max(1) as f64, frame.height / rows.max(1) as f64);
        for (r, row) in self.cells.iter().enumerate() {
            for (c, &v) in row.iter().enumerate() {
                let x = frame.left + c as f64 * cw;
                let y = frame.top + frame.height - (r + 1) as f64 * ch;
                let fill = shade(if max > 0.0 { v / max } else { 0.0 });
                let _ = write!(
                    body,
                    r#"<rect x="{x:.2}" y="{y:.2}" width="{:.2}" height="{:.2}" fill="{fill}"/>"#,
                    cw + 0.05,
                    ch + 0.05
                );
            }
        }
        frame.axes(&mut body, self.title, self.x_label, self.y_label);
        let lx = frame.left + frame.width + 16.0;
        for k in 0..=4 {
            let v = k as f64 / 4.0;
            let y = frame.top + frame.height - v * frame.height;
            let _ = write!(
                body,
                r##"<rect x="{lx:.2}" y="{:.2}" width="14" height="14" fill="{}" stroke="#333"/><text x="{:.2}" y="{:.2}" font-size="10">{}</text>"##,
                y - 7.0,
                shade(v),
                lx + 18.0,
                y + 3.5,
                label(v * max)
            );
        }
        document(PANEL_WIDTH, PANEL_HEIGHT, &body)
    }
}
