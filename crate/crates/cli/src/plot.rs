//! Two-panel SVG line plots of a sweep: diffusion rates on the left, `⟨Y²⟩`
//! on the right.

use std::fmt::Write;

use levcsl::experiments::TableRow;
use levcsl::SweepAxis;

const PANEL_W: f64 = 420.0;
const PANEL_H: f64 = 320.0;
const MARGIN_L: f64 = 70.0;
const MARGIN_R: f64 = 90.0;
const MARGIN_T: f64 = 30.0;
const MARGIN_B: f64 = 50.0;

const COLORS: [&str; 4] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"];

#[derive(Debug, Clone, Copy)]
struct Scale {
    lo: f64,
    hi: f64,
    log: bool,
}

impl Scale {
    /// Data range with 3% padding, in log space for log axes.
    fn fit(values: impl Iterator<Item = f64>, log: bool) -> Option<Self> {
        let t = |v: f64| if log { v.log10() } else { v };
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for v in values.filter(|v| v.is_finite() && (!log || *v > 0.0)) {
            lo = lo.min(t(v));
            hi = hi.max(t(v));
        }
        if !lo.is_finite() {
            return None;
        }
        let pad = if hi > lo {
            0.03 * (hi - lo)
        } else if lo == 0.0 {
            1.0
        } else {
            0.05 * lo.abs()
        };
        let (lo, hi) = (lo - pad, hi + pad);
        Some(if log {
            Self { lo: 10f64.powf(lo), hi: 10f64.powf(hi), log }
        } else {
            Self { lo, hi, log }
        })
    }

    /// Position in [0, 1].
    fn unit(&self, v: f64) -> f64 {
        if self.log {
            (v.log10() - self.lo.log10()) / (self.hi.log10() - self.lo.log10())
        } else {
            (v - self.lo) / (self.hi - self.lo)
        }
    }

    fn ticks(&self) -> Vec<f64> {
        if self.log {
            let (a, b) = (self.lo.log10().floor() as i32, self.hi.log10().ceil() as i32);
            for mantissas in [&[1.0][..], &[1.0, 2.0, 5.0], &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0]] {
                let ticks: Vec<f64> = (a..=b)
                    .flat_map(|k| mantissas.iter().map(move |m| m * 10f64.powi(k)))
                    .filter(|v| (self.lo..=self.hi).contains(v))
                    .collect();
                if ticks.len() >= 3 {
                    return ticks;
                }
            }
        }
        linear_ticks(self.lo, self.hi)
    }
}

/// Multiples of 1, 2 or 5 × 10ᵏ, about five of them.
fn linear_ticks(lo: f64, hi: f64) -> Vec<f64> {
    let raw = (hi - lo) / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0]
        .iter()
        .map(|m| m * mag)
        .find(|s| *s >= raw)
        .unwrap_or(10.0 * mag);
    let first = (lo / step).ceil() as i64;
    let last = (hi / step).floor() as i64;
    (first..=last).map(|i| i as f64 * step).collect()
}

fn label(v: f64) -> String {
    if v == 0.0 {
        "0".into()
    } else if (1e-2..1e4).contains(&v.abs()) {
        format!("{}", (v * 1e6).round() / 1e6)
    } else {
        format!("{v:e}")
    }
}

struct Series<'a> {
    name: &'a str,
    points: Vec<(f64, f64)>,
}

#[allow(clippy::too_many_arguments)]
fn panel(
    svg: &mut String,
    x0: f64,
    title: &str,
    x_label: &str,
    y_label: &str,
    x_log: bool,
    y_log: bool,
    series: &[Series],
) {
    let all = || series.iter().flat_map(|s| s.points.iter());
    let (Some(sx), Some(sy)) = (
        Scale::fit(all().map(|p| p.0), x_log),
        Scale::fit(all().filter(|p| !x_log || p.0 > 0.0).map(|p| p.1), y_log),
    ) else {
        return;
    };
    let (left, top) = (x0 + MARGIN_L, MARGIN_T);
    let (w, h) = (PANEL_W - MARGIN_L - MARGIN_R, PANEL_H - MARGIN_T - MARGIN_B);
    let px = |v: f64| left + sx.unit(v) * w;
    let py = |v: f64| top + (1.0 - sy.unit(v)) * h;

    let _ = writeln!(
        svg,
        r#"<rect x="{left}" y="{top}" width="{w}" height="{h}" fill="none" stroke="black"/>"#
    );
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="{}" text-anchor="middle" font-size="14">{title}</text>"#,
        left + w / 2.0,
        top - 10.0
    );
    for t in sx.ticks() {
        let x = px(t);
        let _ = writeln!(
            svg,
            r#"<line x1="{x:.2}" y1="{}" x2="{x:.2}" y2="{}" stroke="black"/><text x="{x:.2}" y="{}" text-anchor="middle" font-size="10">{}</text>"#,
            top + h,
            top + h + 5.0,
            top + h + 18.0,
            label(t)
        );
    }
    for t in sy.ticks() {
        let y = py(t);
        let _ = writeln!(
            svg,
            r#"<line x1="{}" y1="{y:.2}" x2="{left}" y2="{y:.2}" stroke="black"/><text x="{}" y="{:.2}" text-anchor="end" font-size="10">{}</text>"#,
            left - 5.0,
            left - 8.0,
            y + 3.0,
            label(t)
        );
    }
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="{}" text-anchor="middle" font-size="12">{x_label}</text>"#,
        left + w / 2.0,
        PANEL_H - 10.0
    );
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="{}" text-anchor="middle" font-size="12" transform="rotate(-90 {} {})">{y_label}</text>"#,
        x0 + 15.0,
        top + h / 2.0,
        x0 + 15.0,
        top + h / 2.0
    );

    for (k, s) in series.iter().enumerate() {
        let color = COLORS[k % COLORS.len()];
        let pts: Vec<String> = s
            .points
            .iter()
            .filter(|(x, y)| x.is_finite() && y.is_finite() && (!x_log || *x > 0.0) && (!y_log || *y > 0.0))
            .map(|(x, y)| format!("{:.2},{:.2}", px(*x), py(*y)))
            .collect();
        if !pts.is_empty() {
            let _ = writeln!(
                svg,
                r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
                pts.join(" ")
            );
        }
        let ly = top + 10.0 + 16.0 * k as f64;
        let lx = left + w + 10.0;
        let _ = writeln!(
            svg,
            r#"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="2"/><text x="{}" y="{}" font-size="11">{}</text>"#,
            lx + 20.0,
            lx + 25.0,
            ly + 4.0,
            s.name
        );
    }
}

/// Render `rows` as a two-panel SVG document.
///
/// Both panels have log y axes; x is logarithmic for an ω sweep and linear
/// for an L sweep. Only the `⟨Y²⟩` series present in the rows are drawn.
pub fn render(axis: SweepAxis, rows: &[TableRow]) -> String {
    let x_log = axis == SweepAxis::Omega;
    let x_label = match axis {
        SweepAxis::Omega => "ω (rad/s)",
        SweepAxis::Length => "L (m)",
    };
    let col = |f: fn(&TableRow) -> f64| rows.iter().map(|r| (r.axis_value, f(r))).collect();
    let rates = [
        Series { name: "D_t", points: col(|r| r.d_t) },
        Series { name: "D_c", points: col(|r| r.d_c) },
        Series { name: "D_a", points: col(|r| r.d_a) },
        Series { name: "λ_sph", points: col(|r| r.lambda_sph) },
    ];
    let opt = |f: fn(&TableRow) -> Option<f64>| -> Vec<(f64, f64)> {
        rows.iter()
            .filter_map(|r| f(r).map(|y| (r.axis_value, y)))
            .collect()
    };
    let y2: Vec<Series> = [("CSL on", opt(|r| r.y2_on)), ("CSL off", opt(|r| r.y2_off))]
        .into_iter()
        .filter(|(_, p)| !p.is_empty())
        .map(|(name, points)| Series { name, points })
        .collect();

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{}" height="{PANEL_H}" font-family="sans-serif">"#,
        2.0 * PANEL_W
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    panel(&mut svg, 0.0, "diffusion rates", x_label, "rate (s⁻¹)", x_log, true, &rates);
    panel(&mut svg, PANEL_W, "phase quadrature", x_label, "⟨Y²⟩", x_log, true, &y2);
    svg.push_str("</svg>\n");
    svg
}
