//! Minimal SVG document builder and a 2-D plotting frame.

use std::fmt::Write as _;

pub const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf",
];

pub fn color(i: usize) -> &'static str {
    PALETTE[i % PALETTE.len()]
}

fn esc(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// Coordinates are written with two decimals so output is stable and small.
fn f(v: f64) -> String {
    format!("{v:.2}")
}

pub struct Svg {
    width: f64,
    height: f64,
    body: String,
}

impl Svg {
    pub fn new(width: f64, height: f64) -> Self {
        Svg {
            width,
            height,
            body: String::new(),
        }
    }

    pub fn line(&mut self, x1: f64, y1: f64, x2: f64, y2: f64, stroke: &str, width: f64) {
        let _ = writeln!(
            self.body,
            r#"<line x1="{}" y1="{}" x2="{}" y2="{}" stroke="{stroke}" stroke-width="{}"/>"#,
            f(x1), f(y1), f(x2), f(y2), f(width)
        );
    }

    pub fn polyline(&mut self, pts: &[(f64, f64)], stroke: &str, width: f64, class: &str) {
        let points: Vec<String> = pts.iter().map(|(x, y)| format!("{},{}", f(*x), f(*y))).collect();
        let _ = writeln!(
            self.body,
            r#"<polyline class="{class}" points="{}" fill="none" stroke="{stroke}" stroke-width="{}"/>"#,
            points.join(" "),
            f(width)
        );
    }

    /// Closed filled polygon, used for quantile bands.
    pub fn polygon(&mut self, pts: &[(f64, f64)], fill: &str, opacity: f64, class: &str) {
        let points: Vec<String> = pts.iter().map(|(x, y)| format!("{},{}", f(*x), f(*y))).collect();
        let _ = writeln!(
            self.body,
            r#"<polygon class="{class}" points="{}" fill="{fill}" fill-opacity="{}" stroke="none"/>"#,
            points.join(" "),
            f(opacity)
        );
    }

    pub fn rect(&mut self, x: f64, y: f64, w: f64, h: f64, fill: &str, class: &str) {
        let _ = writeln!(
            self.body,
            r#"<rect class="{class}" x="{}" y="{}" width="{}" height="{}" fill="{fill}"/>"#,
            f(x), f(y), f(w), f(h)
        );
    }

    pub fn circle(&mut self, cx: f64, cy: f64, r: f64, fill: &str, class: &str) {
        let _ = writeln!(
            self.body,
            r##"<circle class="{class}" cx="{}" cy="{}" r="{}" fill="{fill}" stroke="#333" stroke-width="0.5"/>"##,
            f(cx), f(cy), f(r)
        );
    }

    pub fn text(&mut self, x: f64, y: f64, s: &str, size: f64, anchor: &str, class: &str) {
        let _ = writeln!(
            self.body,
            r#"<text class="{class}" x="{}" y="{}" font-size="{}" text-anchor="{anchor}" font-family="sans-serif">{}</text>"#,
            f(x), f(y), f(size), esc(s)
        );
    }

    /// Text rotated by -90° about its anchor point.
    pub fn vtext(&mut self, x: f64, y: f64, s: &str, size: f64, anchor: &str, class: &str) {
        let _ = writeln!(
            self.body,
            r#"<text class="{class}" x="{}" y="{}" font-size="{}" text-anchor="{anchor}" font-family="sans-serif" transform="rotate(-90 {} {})">{}</text>"#,
            f(x), f(y), f(size), f(x), f(y), esc(s)
        );
    }

    pub fn finish(self) -> String {
        format!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\">\n<rect width=\"{w}\" height=\"{h}\" fill=\"white\"/>\n{}</svg>\n",
            self.body,
            w = self.width,
            h = self.height
        )
    }
}

/// Maps data coordinates into a rectangle of an [`Svg`].
#[derive(Debug, Clone, Copy)]
pub struct Frame {
    pub left: f64,
    pub top: f64,
    pub width: f64,
    pub height: f64,
    pub x: (f64, f64),
    pub y: (f64, f64),
}

fn padded(lo: f64, hi: f64) -> (f64, f64) {
    if !(hi > lo) {
        let c = if lo.is_finite() { lo } else { 0.0 };
        return (c - 1.0, c + 1.0);
    }
    let pad = (hi - lo) * 0.05;
    (lo - pad, hi + pad)
}

impl Frame {
    pub fn new(left: f64, top: f64, width: f64, height: f64, x: (f64, f64), y: (f64, f64)) -> Self {
        Frame {
            left,
            top,
            width,
            height,
            x: if x.1 > x.0 { x } else { padded(x.0, x.1) },
            y: padded(y.0, y.1),
        }
    }

    pub fn px(&self, x: f64) -> f64 {
        self.left + (x - self.x.0) / (self.x.1 - self.x.0) * self.width
    }

    pub fn py(&self, y: f64) -> f64 {
        self.top + self.height - (y - self.y.0) / (self.y.1 - self.y.0) * self.height
    }

    pub fn map(&self, pts: &[(f64, f64)]) -> Vec<(f64, f64)> {
        pts.iter().map(|&(x, y)| (self.px(x), self.py(y))).collect()
    }

    /// Axes box, five ticks per axis, title and axis labels.
    pub fn draw_axes(&self, svg: &mut Svg, title: &str, xlabel: &str, ylabel: &str) {
        let (l, t, w, h) = (self.left, self.top, self.width, self.height);
        svg.line(l, t + h, l + w, t + h, "#000", 1.0);
        svg.line(l, t, l, t + h, "#000", 1.0);
        for i in 0..=4 {
            let fx = self.x.0 + (self.x.1 - self.x.0) * f64::from(i) / 4.0;
            let fy = self.y.0 + (self.y.1 - self.y.0) * f64::from(i) / 4.0;
            let (tx, ty) = (self.px(fx), self.py(fy));
            svg.line(tx, t + h, tx, t + h + 4.0, "#000", 1.0);
            svg.text(tx, t + h + 15.0, &tick(fx), 9.0, "middle", "tick");
            svg.line(l - 4.0, ty, l, ty, "#000", 1.0);
            svg.text(l - 6.0, ty + 3.0, &tick(fy), 9.0, "end", "tick");
        }
        svg.text(l + w / 2.0, t - 8.0, title, 12.0, "middle", "title");
        svg.text(l + w / 2.0, t + h + 30.0, xlabel, 10.0, "middle", "xlabel");
        svg.vtext(l - 42.0, t + h / 2.0, ylabel, 10.0, "middle", "ylabel");
    }
}

fn tick(v: f64) -> String {
    let a = v.abs();
    if a != 0.0 && !(1e-2..1e4).contains(&a) {
        format!("{v:.1e}")
    } else if a >= 100.0 {
        format!("{v:.0}")
    } else {
        format!("{v:.2}")
    }
}

/// Legend entries stacked at (x, y).
pub fn legend(svg: &mut Svg, x: f64, y: f64, entries: &[(String, &str)]) {
    for (i, (label, col)) in entries.iter().enumerate() {
        let yy = y + 14.0 * i as f64;
        svg.rect(x, yy - 8.0, 10.0, 10.0, col, "legend-key");
        svg.text(x + 14.0, yy + 1.0, label, 10.0, "start", "legend");
    }
}
