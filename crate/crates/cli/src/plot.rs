//! Minimal SVG line charts: gap-vs-k on log-log axes and solution snapshots.

use std::fmt::Write;

const W: f64 = 640.0;
const H: f64 = 420.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 50.0;
const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scale {
    Linear,
    Log,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Style {
    Line,
    Dashed,
    LineMarkers,
}

#[derive(Debug, Clone)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
    pub style: Style,
}

#[derive(Debug, Clone, Copy)]
struct Axis {
    scale: Scale,
    lo: f64,
    hi: f64,
    px_lo: f64,
    px_hi: f64,
}

impl Axis {
    fn fit(scale: Scale, values: impl Iterator<Item = f64>, px_lo: f64, px_hi: f64) -> Self {
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for v in values {
            let v = Self::raw(scale, v);
            if v.is_finite() {
                lo = lo.min(v);
                hi = hi.max(v);
            }
        }
        if !lo.is_finite() {
            (lo, hi) = (0.0, 1.0);
        }
        if hi - lo < 1e-12 {
            lo -= 0.5;
            hi += 0.5;
        }
        let pad = 0.05 * (hi - lo);
        Axis { scale, lo: lo - pad, hi: hi + pad, px_lo, px_hi }
    }

    fn raw(scale: Scale, v: f64) -> f64 {
        match scale {
            Scale::Linear => v,
            Scale::Log if v > 0.0 => v.log10(),
            Scale::Log => f64::NAN,
        }
    }

    fn project(&self, v: f64) -> f64 {
        let r = Self::raw(self.scale, v);
        self.px_lo + (r - self.lo) / (self.hi - self.lo) * (self.px_hi - self.px_lo)
    }

    fn unproject(&self, p: f64) -> f64 {
        let r = self.lo + (p - self.px_lo) / (self.px_hi - self.px_lo) * (self.hi - self.lo);
        match self.scale {
            Scale::Linear => r,
            Scale::Log => 10f64.powf(r),
        }
    }

    fn ticks(&self) -> Vec<f64> {
        match self.scale {
            Scale::Log => {
                let (a, b) = (self.lo.ceil() as i32, self.hi.floor() as i32);
                if b >= a {
                    (a..=b).map(|e| 10f64.powi(e)).collect()
                } else {
                    vec![self.unproject(0.5 * (self.px_lo + self.px_hi))]
                }
            }
            Scale::Linear => {
                let span = self.hi - self.lo;
                let step = 10f64.powf((span / 5.0).log10().floor());
                let step = [1.0, 2.0, 5.0, 10.0].iter().map(|m| m * step).find(|s| span / s <= 6.0).unwrap_or(step);
                let mut t = (self.lo / step).ceil() * step;
                let mut out = Vec::new();
                while t <= self.hi + 1e-12 {
                    out.push(if t.abs() < 1e-12 * step { 0.0 } else { t });
                    t += step;
                }
                out
            }
        }
    }
}

/// A chart with fixed axes; [`Chart::render`] produces the SVG text.
#[derive(Debug, Clone)]
pub struct Chart {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub series: Vec<Series>,
    x: Axis,
    y: Axis,
}

impl Chart {
    pub fn new(title: &str, x_label: &str, y_label: &str, xs: Scale, ys: Scale, series: Vec<Series>) -> Self {
        let all = || series.iter().flat_map(|s| s.points.iter().copied());
        let x = Axis::fit(xs, all().map(|p| p.0), LEFT, W - RIGHT);
        let y = Axis::fit(ys, all().map(|p| p.1), H - BOTTOM, TOP);
        Chart { title: title.into(), x_label: x_label.into(), y_label: y_label.into(), series, x, y }
    }

    pub fn to_px(&self, p: (f64, f64)) -> (f64, f64) {
        (self.x.project(p.0), self.y.project(p.1))
    }

    pub fn from_px(&self, p: (f64, f64)) -> (f64, f64) {
        (self.x.unproject(p.0), self.y.unproject(p.1))
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
        );
        let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
        let _ = writeln!(
            s,
            r#"<text x="{}" y="22" text-anchor="middle" font-size="14">{}</text>"#,
            W / 2.0,
            esc(&self.title)
        );
        let (x0, x1, y0, y1) = (LEFT, W - RIGHT, H - BOTTOM, TOP);
        let _ = writeln!(
            s,
            r#"<rect x="{x0}" y="{y1}" width="{}" height="{}" fill="none" stroke="black"/>"#,
            x1 - x0,
            y0 - y1
        );
        for t in self.x.ticks() {
            let p = self.x.project(t);
            let _ = writeln!(s, r##"<line x1="{p:.2}" y1="{y0}" x2="{p:.2}" y2="{y1}" stroke="#ddd"/>"##);
            let _ = writeln!(
                s,
                r#"<text x="{p:.2}" y="{}" text-anchor="middle">{}</text>"#,
                y0 + 16.0,
                tick_label(t, self.x.scale)
            );
        }
        for t in self.y.ticks() {
            let p = self.y.project(t);
            let _ = writeln!(s, r##"<line x1="{x0}" y1="{p:.2}" x2="{x1}" y2="{p:.2}" stroke="#ddd"/>"##);
            let _ = writeln!(
                s,
                r#"<text x="{}" y="{:.2}" text-anchor="end">{}</text>"#,
                x0 - 6.0,
                p + 4.0,
                tick_label(t, self.y.scale)
            );
        }
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
            (x0 + x1) / 2.0,
            H - 12.0,
            esc(&self.x_label)
        );
        let _ = writeln!(
            s,
            r#"<text x="16" y="{0}" text-anchor="middle" transform="rotate(-90 16 {0})">{1}</text>"#,
            (y0 + y1) / 2.0,
            esc(&self.y_label)
        );
        for (i, ser) in self.series.iter().enumerate() {
            let color = COLORS[i % COLORS.len()];
            let pts: Vec<(f64, f64)> =
                ser.points.iter().map(|&p| self.to_px(p)).filter(|p| p.0.is_finite() && p.1.is_finite()).collect();
            let list: Vec<String> = pts.iter().map(|p| format!("{:.3},{:.3}", p.0, p.1)).collect();
            let dash = if ser.style == Style::Dashed { r#" stroke-dasharray="6 4""# } else { "" };
            let _ = writeln!(
                s,
                r#"<polyline data-label="{}" points="{}" fill="none" stroke="{color}" stroke-width="1.5"{dash}/>"#,
                esc(&ser.label),
                list.join(" ")
            );
            if ser.style == Style::LineMarkers {
                for p in &pts {
                    let _ = writeln!(s, r#"<circle cx="{:.3}" cy="{:.3}" r="3" fill="{color}"/>"#, p.0, p.1);
                }
            }
            let ly = y1 + 14.0 + 16.0 * i as f64;
            let _ = writeln!(
                s,
                r#"<line x1="{}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="2"{dash}/>"#,
                x1 - 185.0,
                x1 - 165.0
            );
            let _ = writeln!(s, r#"<text x="{}" y="{}">{}</text>"#, x1 - 160.0, ly + 4.0, esc(&ser.label));
        }
        s.push_str("</svg>\n");
        s
    }
}

fn tick_label(t: f64, scale: Scale) -> String {
    match scale {
        Scale::Log => format!("1e{}", t.log10().round() as i32),
        Scale::Linear => format!("{}", (t * 1e6).round() / 1e6),
    }
}

fn esc(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// Gap against k with the bound overlay and a `k^{-1/2}` guide through the first point.
pub fn gap_chart(ks: &[f64], gaps: &[f64], bounds: &[f64]) -> Chart {
    let mut series = vec![Series {
        label: "sup gap".into(),
        points: ks.iter().copied().zip(gaps.iter().copied()).collect(),
        style: Style::LineMarkers,
    }];
    if !bounds.is_empty() {
        series.push(Series {
            label: "bound + allowance".into(),
            points: ks.iter().copied().zip(bounds.iter().copied()).collect(),
            style: Style::Dashed,
        });
    }
    if let (Some(&k0), Some(&g0)) = (ks.first(), gaps.first()) {
        if g0 > 0.0 {
            series.push(Series {
                label: "k^-1/2".into(),
                points: ks.iter().map(|&k| (k, g0 * (k / k0).powf(-0.5))).collect(),
                style: Style::Line,
            });
        }
    }
    Chart::new("primitive gap vs k", "k", "sup |Q^k - Q|", Scale::Log, Scale::Log, series)
}

/// Extracts every `points="..."` list from rendered SVG, in document order.
pub fn polylines(svg: &str) -> Vec<Vec<(f64, f64)>> {
    svg.lines()
        .filter(|l| l.starts_with("<polyline"))
        .filter_map(|l| {
            let start = l.find("points=\"")? + 8;
            let end = start + l[start..].find('"')?;
            Some(
                l[start..end]
                    .split_whitespace()
                    .filter_map(|p| {
                        let (a, b) = p.split_once(',')?;
                        Some((a.parse().ok()?, b.parse().ok()?))
                    })
                    .collect(),
            )
        })
        .collect()
}
