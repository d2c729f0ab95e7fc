//! Self-contained SVG line and box charts. Output depends only on the
//! data, so the same inputs always give the same bytes.

use std::fmt::Write;

use bcm_harness::quantile;

pub const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#17becf",
];

const PANEL_W: f64 = 460.0;
const PANEL_H: f64 = 340.0;
const MARGIN_L: f64 = 62.0;
const MARGIN_R: f64 = 16.0;
const MARGIN_T: f64 = 34.0;
const MARGIN_B: f64 = 74.0;

/// Pixel coordinate with two decimals.
fn px(v: f64) -> String {
    let s = format!("{v:.2}");
    if s == "-0.00" {
        "0.00".to_string()
    } else {
        s
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Scale {
    lo: f64,
    hi: f64,
}

impl Scale {
    fn covering(values: impl IntoIterator<Item = f64>) -> Scale {
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for v in values.into_iter().filter(|v| v.is_finite()) {
            lo = lo.min(v);
            hi = hi.max(v);
        }
        if !lo.is_finite() {
            return Scale { lo: 0.0, hi: 1.0 };
        }
        if hi - lo < 1e-12 {
            let pad = if lo.abs() > 1e-12 { lo.abs() * 0.1 } else { 0.5 };
            return Scale { lo: lo - pad, hi: hi + pad };
        }
        Scale { lo, hi }
    }

    fn padded(self, frac: f64) -> Scale {
        let pad = (self.hi - self.lo) * frac;
        Scale {
            lo: self.lo - pad,
            hi: self.hi + pad,
        }
    }

    fn frac(&self, v: f64) -> f64 {
        (v - self.lo) / (self.hi - self.lo)
    }

    /// Round tick values in steps of 1, 2 or 5 times a power of ten.
    fn ticks(&self, target: usize) -> (Vec<f64>, usize) {
        let raw = (self.hi - self.lo) / target.max(1) as f64;
        let mag = 10f64.powf(raw.log10().floor());
        let step = [1.0, 2.0, 5.0, 10.0]
            .iter()
            .map(|m| m * mag)
            .find(|s| *s >= raw)
            .unwrap_or(10.0 * mag);
        let decimals = (-step.log10().floor()).max(0.0) as usize;
        let first = (self.lo / step).ceil() as i64;
        let last = (self.hi / step).floor() as i64;
        ((first..=last).map(|k| k as f64 * step).collect(), decimals)
    }
}

/// One polyline.
#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub label: Option<String>,
    pub color: String,
    pub points: Vec<(f64, f64)>,
    pub width: f64,
    pub opacity: f64,
    pub dashed: bool,
}

/// Shaded region between two curves over the same x values.
#[derive(Debug, Clone, PartialEq)]
pub struct Band {
    pub color: String,
    pub x: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub opacity: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct LinePanel {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub series: Vec<Series>,
    pub bands: Vec<Band>,
    /// Vertical reference lines at these x values.
    pub markers: Vec<f64>,
    pub y_range: Option<(f64, f64)>,
}

/// Quartiles, whiskers and raw points of one box.
#[derive(Debug, Clone, PartialEq)]
pub struct BoxStats {
    pub label: String,
    pub color: String,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub mean: f64,
    pub whisker_lo: f64,
    pub whisker_hi: f64,
    pub points: Vec<f64>,
}

impl BoxStats {
    /// Whiskers reach the most extreme values within 1.5 IQR of the box.
    pub fn from_values(label: impl Into<String>, color: impl Into<String>, values: &[f64]) -> Option<BoxStats> {
        if values.is_empty() {
            return None;
        }
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        let q1 = quantile(&sorted, 0.25);
        let q3 = quantile(&sorted, 0.75);
        let reach = 1.5 * (q3 - q1);
        let whisker_lo = sorted.iter().copied().find(|v| *v >= q1 - reach).unwrap_or(q1);
        let whisker_hi = sorted.iter().rev().copied().find(|v| *v <= q3 + reach).unwrap_or(q3);
        Some(BoxStats {
            label: label.into(),
            color: color.into(),
            q1,
            median: quantile(&sorted, 0.5),
            q3,
            mean: values.iter().sum::<f64>() / values.len() as f64,
            whisker_lo,
            whisker_hi,
            points: values.to_vec(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct BoxPanel {
    pub title: String,
    pub y_label: String,
    pub boxes: Vec<BoxStats>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Panel {
    Line(LinePanel),
    Box(BoxPanel),
}

/// Lays panels out left to right in rows of `columns`.
pub fn render(title: &str, panels: &[Panel], columns: usize) -> String {
    let columns = columns.clamp(1, panels.len().max(1));
    let rows = panels.len().div_ceil(columns).max(1);
    let top = if title.is_empty() { 0.0 } else { 28.0 };
    let width = PANEL_W * columns as f64;
    let height = top + PANEL_H * rows as f64;
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif">"#,
        w = px(width),
        h = px(height)
    );
    let _ = writeln!(out, r#"<rect x="0" y="0" width="{}" height="{}" fill="white"/>"#, px(width), px(height));
    if !title.is_empty() {
        let _ = writeln!(
            out,
            r#"<text x="{}" y="20" font-size="15" text-anchor="middle">{}</text>"#,
            px(width / 2.0),
            escape(title)
        );
    }
    for (k, panel) in panels.iter().enumerate() {
        let ox = PANEL_W * (k % columns) as f64;
        let oy = top + PANEL_H * (k / columns) as f64;
        let _ = writeln!(out, r#"<g transform="translate({},{})">"#, px(ox), px(oy));
        match panel {
            Panel::Line(p) => line_panel(&mut out, p),
            Panel::Box(p) => box_panel(&mut out, p),
        }
        out.push_str("</g>\n");
    }
    out.push_str("</svg>\n");
    out
}

struct Area {
    x: Scale,
    y: Scale,
}

impl Area {
    fn left() -> f64 {
        MARGIN_L
    }
    fn right() -> f64 {
        PANEL_W - MARGIN_R
    }
    fn top() -> f64 {
        MARGIN_T
    }
    fn bottom() -> f64 {
        PANEL_H - MARGIN_B
    }

    fn px(&self, x: f64) -> f64 {
        Self::left() + self.x.frac(x) * (Self::right() - Self::left())
    }

    fn py(&self, y: f64) -> f64 {
        Self::bottom() - self.y.frac(y) * (Self::bottom() - Self::top())
    }

    fn frame(&self, out: &mut String, title: &str, y_label: &str) {
        let (l, r, t, b) = (Self::left(), Self::right(), Self::top(), Self::bottom());
        let _ = writeln!(
            out,
            r#"<text x="{}" y="20" font-size="13" text-anchor="middle">{}</text>"#,
            px((l + r) / 2.0),
            escape(title)
        );
        let (ticks, decimals) = self.y.ticks(5);
        for v in ticks {
            let y = self.py(v);
            let _ = writeln!(
                out,
                r##"<line x1="{}" y1="{y}" x2="{}" y2="{y}" stroke="#e5e5e5"/><text x="{}" y="{}" font-size="10" text-anchor="end">{v:.decimals$}</text>"##,
                px(l),
                px(r),
                px(l - 4.0),
                px(y + 3.0),
                y = px(y)
            );
        }
        let _ = writeln!(
            out,
            r#"<rect x="{}" y="{}" width="{}" height="{}" fill="none" stroke="black"/>"#,
            px(l),
            px(t),
            px(r - l),
            px(b - t)
        );
        let cy = (t + b) / 2.0;
        let _ = writeln!(
            out,
            r#"<text x="14" y="{cy}" font-size="11" text-anchor="middle" transform="rotate(-90 14 {cy})">{}</text>"#,
            escape(y_label),
            cy = px(cy)
        );
    }
}

fn line_panel(out: &mut String, p: &LinePanel) {
    let xs = p.series.iter().flat_map(|s| s.points.iter().map(|q| q.0)).chain(p.bands.iter().flat_map(|b| b.x.iter().copied()));
    let x = Scale::covering(xs);
    let y = match p.y_range {
        Some((lo, hi)) => Scale { lo, hi },
        None => Scale::covering(
            p.series
                .iter()
                .flat_map(|s| s.points.iter().map(|q| q.1))
                .chain(p.bands.iter().flat_map(|b| b.lower.iter().chain(&b.upper).copied())),
        )
        .padded(0.05),
    };
    let area = Area { x, y };
    area.frame(out, &p.title, &p.y_label);
    let (ticks, decimals) = x.ticks(6);
    for v in ticks {
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{}" font-size="10" text-anchor="middle">{v:.decimals$}</text>"#,
            px(area.px(v)),
            px(Area::bottom() + 14.0)
        );
    }
    let _ = writeln!(
        out,
        r#"<text x="{}" y="{}" font-size="11" text-anchor="middle">{}</text>"#,
        px((Area::left() + Area::right()) / 2.0),
        px(Area::bottom() + 30.0),
        escape(&p.x_label)
    );
    for b in &p.bands {
        let mut pts: Vec<String> = b.x.iter().zip(&b.upper).map(|(&x, &y)| format!("{},{}", px(area.px(x)), px(area.py(y)))).collect();
        pts.extend(b.x.iter().zip(&b.lower).rev().map(|(&x, &y)| format!("{},{}", px(area.px(x)), px(area.py(y)))));
        let _ = writeln!(
            out,
            r#"<polygon class="band" points="{}" fill="{}" fill-opacity="{}" stroke="none"/>"#,
            pts.join(" "),
            b.color,
            b.opacity
        );
    }
    for s in &p.series {
        let pts: Vec<String> = s.points.iter().map(|&(x, y)| format!("{},{}", px(area.px(x)), px(area.py(y)))).collect();
        let dash = if s.dashed { r#" stroke-dasharray="4 3""# } else { "" };
        let _ = writeln!(
            out,
            r#"<polyline points="{}" fill="none" stroke="{}" stroke-width="{}" stroke-opacity="{}"{dash}/>"#,
            pts.join(" "),
            s.color,
            s.width,
            s.opacity
        );
    }
    for &m in &p.markers {
        let _ = writeln!(
            out,
            r#"<line x1="{x}" y1="{}" x2="{x}" y2="{}" stroke="black" stroke-dasharray="2 2"/>"#,
            px(Area::top()),
            px(Area::bottom()),
            x = px(area.px(m))
        );
    }
    let labelled: Vec<&Series> = p.series.iter().filter(|s| s.label.is_some()).collect();
    legend(out, labelled.iter().map(|s| (s.label.as_deref().unwrap_or(""), s.color.as_str())));
}

fn legend<'a>(out: &mut String, entries: impl Iterator<Item = (&'a str, &'a str)>) {
    let mut x = Area::left();
    let y = PANEL_H - 18.0;
    for (label, color) in entries {
        let _ = writeln!(
            out,
            r#"<rect x="{}" y="{}" width="10" height="10" fill="{color}"/><text x="{}" y="{}" font-size="10">{}</text>"#,
            px(x),
            px(y - 9.0),
            px(x + 13.0),
            px(y),
            escape(label)
        );
        x += 22.0 + 6.0 * label.chars().count() as f64;
    }
}

fn box_panel(out: &mut String, p: &BoxPanel) {
    let values = p
        .boxes
        .iter()
        .flat_map(|b| b.points.iter().copied().chain([b.whisker_lo, b.whisker_hi]));
    let y = Scale::covering(values).padded(0.05);
    let n = p.boxes.len().max(1) as f64;
    let area = Area {
        x: Scale { lo: 0.0, hi: n },
        y,
    };
    area.frame(out, &p.title, &p.y_label);
    let slot = (Area::right() - Area::left()) / n;
    let half = (slot * 0.3).min(28.0);
    for (k, b) in p.boxes.iter().enumerate() {
        let cx = area.px(k as f64 + 0.5);
        let _ = writeln!(
            out,
            r#"<g class="box" data-label="{}" data-n="{}" data-q1="{}" data-median="{}" data-q3="{}" data-mean="{}" data-whisker-lo="{}" data-whisker-hi="{}">"#,
            escape(&b.label),
            b.points.len(),
            b.q1,
            b.median,
            b.q3,
            b.mean,
            b.whisker_lo,
            b.whisker_hi
        );
        let _ = writeln!(
            out,
            r#"<line x1="{cx}" y1="{}" x2="{cx}" y2="{}" stroke="black"/>"#,
            px(area.py(b.whisker_lo)),
            px(area.py(b.whisker_hi)),
            cx = px(cx)
        );
        for w in [b.whisker_lo, b.whisker_hi] {
            let _ = writeln!(
                out,
                r#"<line x1="{}" y1="{y}" x2="{}" y2="{y}" stroke="black"/>"#,
                px(cx - half / 2.0),
                px(cx + half / 2.0),
                y = px(area.py(w))
            );
        }
        let _ = writeln!(
            out,
            r#"<rect x="{}" y="{}" width="{}" height="{}" fill="{}" fill-opacity="0.35" stroke="{}"/>"#,
            px(cx - half),
            px(area.py(b.q3)),
            px(2.0 * half),
            px(area.py(b.q1) - area.py(b.q3)),
            b.color,
            b.color
        );
        let _ = writeln!(
            out,
            r#"<line x1="{}" y1="{y}" x2="{}" y2="{y}" stroke="black" stroke-width="2"/>"#,
            px(cx - half),
            px(cx + half),
            y = px(area.py(b.median))
        );
        for (j, &v) in b.points.iter().enumerate() {
            // Deterministic horizontal jitter.
            let dx = ((j * 7) % 11) as f64 / 10.0 - 0.5;
            let _ = writeln!(
                out,
                r#"<circle cx="{}" cy="{}" r="2" fill="{}" fill-opacity="0.7"/>"#,
                px(cx + dx * half),
                px(area.py(v)),
                b.color
            );
        }
        let ly = Area::bottom() + 12.0;
        let _ = writeln!(
            out,
            r#"<text x="{x}" y="{y}" font-size="10" text-anchor="end" transform="rotate(-35 {x} {y})">{}</text>"#,
            escape(&b.label),
            x = px(cx),
            y = px(ly)
        );
        out.push_str("</g>\n");
    }
}
