//! Dependency-free SVG line plots of rejection curves: one panel each for NRA, CQ and RQ.

use std::fmt::Write;

use abstain_core::rejection::CurvePoint;

const PANEL_W: f64 = 300.0;
const PANEL_H: f64 = 240.0;
const MARGIN_L: f64 = 48.0;
const MARGIN_R: f64 = 16.0;
const MARGIN_T: f64 = 56.0;
const MARGIN_B: f64 = 40.0;
const COLORS: [&str; 6] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf",
];

pub struct Series<'a> {
    pub label: &'a str,
    pub points: &'a [CurvePoint],
}

#[derive(Clone, Copy)]
enum Metric {
    Nra,
    Cq,
    Rq,
}

impl Metric {
    fn title(self) -> &'static str {
        match self {
            Metric::Nra => "Non-rejected accuracy",
            Metric::Cq => "Classification quality",
            Metric::Rq => "Rejection quality",
        }
    }

    /// `None` where the metric is undefined or infinite; such points break the line.
    fn value(self, p: &CurvePoint) -> Option<f64> {
        match self {
            Metric::Nra => Some(p.nra),
            Metric::Cq => Some(p.cq),
            Metric::Rq => p.rq.filter(|_| p.rq_defined && !p.rq_infinite),
        }
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

/// Smallest "nice" bound (1, 2 or 5 times a power of ten) not below `x`.
fn nice_ceil(x: f64) -> f64 {
    if x <= 0.0 || !x.is_finite() {
        return 1.0;
    }
    let p = 10f64.powf(x.log10().floor());
    [1.0, 2.0, 5.0, 10.0]
        .into_iter()
        .map(|m| m * p)
        .find(|&v| v >= x * (1.0 - 1e-12))
        .unwrap_or(10.0 * p)
}

pub fn render_curves(title: &str, series: &[Series<'_>]) -> String {
    let metrics = [Metric::Nra, Metric::Cq, Metric::Rq];
    let width = PANEL_W * metrics.len() as f64;
    let height = PANEL_H + 20.0 * series.len().div_ceil(3) as f64;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="18" text-anchor="middle" font-size="14">{}</text>"#,
        width / 2.0,
        escape(title)
    );
    for (k, &metric) in metrics.iter().enumerate() {
        panel(&mut s, k as f64 * PANEL_W, metric, series);
    }
    for (i, line) in series.iter().enumerate() {
        let x = 20.0 + (i % 3) as f64 * PANEL_W;
        let y = PANEL_H + 10.0 + 20.0 * (i / 3) as f64;
        let color = COLORS[i % COLORS.len()];
        let _ = writeln!(
            s,
            r#"<line x1="{x}" y1="{y}" x2="{}" y2="{y}" stroke="{color}" stroke-width="2"/><text x="{}" y="{}">{}</text>"#,
            x + 20.0,
            x + 26.0,
            y + 4.0,
            escape(line.label)
        );
    }
    s.push_str("</svg>\n");
    s
}

fn panel(s: &mut String, x0: f64, metric: Metric, series: &[Series<'_>]) {
    let y_max = match metric {
        Metric::Rq => nice_ceil(
            series
                .iter()
                .flat_map(|l| l.points.iter().filter_map(|p| metric.value(p)))
                .fold(0.0, f64::max),
        ),
        _ => 1.0,
    };
    let left = x0 + MARGIN_L;
    let right = x0 + PANEL_W - MARGIN_R;
    let top = MARGIN_T;
    let bottom = PANEL_H - MARGIN_B;
    let px = |q: f64| left + q * (right - left);
    let py = |v: f64| bottom - (v / y_max).clamp(0.0, 1.0) * (bottom - top);

    let _ = writeln!(
        s,
        r#"<text x="{}" y="40" text-anchor="middle" font-size="12">{}</text>"#,
        (left + right) / 2.0,
        metric.title()
    );
    let _ = writeln!(
        s,
        r##"<rect x="{left}" y="{top}" width="{}" height="{}" fill="none" stroke="#444"/>"##,
        right - left,
        bottom - top
    );
    for i in 0..=4 {
        let f = f64::from(i) / 4.0;
        let _ = writeln!(
            s,
            r##"<line x1="{left}" y1="{y}" x2="{right}" y2="{y}" stroke="#ddd"/><text x="{}" y="{}" text-anchor="end">{}</text>"##,
            left - 4.0,
            py(f * y_max) + 4.0,
            trim(f * y_max),
            y = py(f * y_max),
        );
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
            px(f),
            bottom + 14.0,
            trim(f)
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle">rejected fraction</text>"#,
        (left + right) / 2.0,
        bottom + 30.0
    );
    for (i, line) in series.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let mut segment: Vec<String> = Vec::new();
        let flush = |segment: &mut Vec<String>, s: &mut String| {
            if !segment.is_empty() {
                let _ = writeln!(
                    s,
                    r#"<polyline fill="none" stroke="{color}" stroke-width="2" points="{}"/>"#,
                    segment.join(" ")
                );
                segment.clear();
            }
        };
        for p in line.points {
            match metric.value(p) {
                Some(v) => segment.push(format!("{:.2},{:.2}", px(p.q), py(v))),
                None => flush(&mut segment, s),
            }
        }
        flush(&mut segment, s);
    }
}

fn trim(x: f64) -> String {
    let t = format!("{x:.2}");
    t.trim_end_matches('0').trim_end_matches('.').to_string()
}
