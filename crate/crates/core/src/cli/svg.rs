//! Minimal hand-written SVG charts.

use std::fmt::Write;

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 500.0;
const MARGIN: f64 = 60.0;
const LEGEND_WIDTH: f64 = 150.0;
const PALETTE: [&str; 10] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf",
];

pub fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

struct Frame {
    x: (f64, f64),
    y: (f64, f64),
    plot_right: f64,
}

impl Frame {
    fn new(xs: impl Iterator<Item = f64> + Clone, ys: impl Iterator<Item = f64> + Clone, legend: bool) -> Self {
        let range = |it: &mut dyn Iterator<Item = f64>| {
            let (lo, hi) = it.fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), v| (l.min(v), h.max(v)));
            if !lo.is_finite() {
                (0.0, 1.0)
            } else if hi - lo < 1e-12 {
                let pad = if lo.abs() > 0.0 { lo.abs() * 0.05 } else { 1.0 };
                (lo - pad, hi + pad)
            } else {
                (lo, hi)
            }
        };
        Self {
            x: range(&mut xs.clone()),
            y: range(&mut ys.clone()),
            plot_right: WIDTH - MARGIN - if legend { LEGEND_WIDTH } else { 0.0 },
        }
    }

    fn px(&self, x: f64) -> f64 {
        MARGIN + (x - self.x.0) / (self.x.1 - self.x.0) * (self.plot_right - MARGIN)
    }

    fn py(&self, y: f64) -> f64 {
        HEIGHT - MARGIN - (y - self.y.0) / (self.y.1 - self.y.0) * (HEIGHT - 2.0 * MARGIN)
    }

    fn axes(&self, out: &mut String, title: &str, x_label: &str, y_label: &str) {
        let bottom = HEIGHT - MARGIN;
        let _ = writeln!(
            out,
            r#"<text x="{:.1}" y="30" text-anchor="middle" font-size="16">{}</text>"#,
            WIDTH / 2.0,
            escape(title)
        );
        let _ = writeln!(
            out,
            r#"<line x1="{MARGIN}" y1="{bottom}" x2="{:.1}" y2="{bottom}" stroke="black"/>"#,
            self.plot_right
        );
        let _ = writeln!(out, r#"<line x1="{MARGIN}" y1="{MARGIN}" x2="{MARGIN}" y2="{bottom}" stroke="black"/>"#);
        for (v, anchor_y) in [(self.y.0, bottom), (self.y.1, MARGIN)] {
            let _ = writeln!(
                out,
                r#"<text x="{:.1}" y="{:.1}" text-anchor="end" font-size="11">{}</text>"#,
                MARGIN - 5.0,
                anchor_y + 4.0,
                tick(v)
            );
        }
        let _ = writeln!(
            out,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle" font-size="13">{}</text>"#,
            (MARGIN + self.plot_right) / 2.0,
            HEIGHT - 15.0,
            escape(x_label)
        );
        let _ = writeln!(
            out,
            r#"<text x="15" y="{:.1}" text-anchor="middle" font-size="13" transform="rotate(-90 15 {:.1})">{}</text>"#,
            HEIGHT / 2.0,
            HEIGHT / 2.0,
            escape(y_label)
        );
    }
}

fn tick(v: f64) -> String {
    if v.abs() >= 100.0 {
        format!("{v:.0}")
    } else {
        format!("{v:.4}")
    }
}

fn open() -> String {
    format!(
        "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" viewBox=\"0 0 {WIDTH} {HEIGHT}\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
    )
}

fn legend(out: &mut String, frame: &Frame, names: &[&str]) {
    for (i, name) in names.iter().enumerate() {
        let y = MARGIN + 18.0 * i as f64;
        let x = frame.plot_right + 15.0;
        let color = PALETTE[i % PALETTE.len()];
        let _ = writeln!(
            out,
            r#"<g class="legend"><rect x="{x:.1}" y="{:.1}" width="12" height="12" fill="{color}"/><text x="{:.1}" y="{:.1}" font-size="12">{}</text></g>"#,
            y - 10.0,
            x + 18.0,
            y,
            escape(name)
        );
    }
}

/// One polyline per named series over a shared index axis.
pub fn line_chart(title: &str, x_label: &str, y_label: &str, series: &[(String, Vec<f64>)]) -> String {
    let longest = series.iter().map(|(_, v)| v.len()).max().unwrap_or(0);
    let frame = Frame::new(
        (0..longest.max(2)).map(|i| i as f64),
        series.iter().flat_map(|(_, v)| v.iter().copied()),
        true,
    );
    let mut out = open();
    frame.axes(&mut out, title, x_label, y_label);
    for (i, (name, values)) in series.iter().enumerate() {
        let points: Vec<String> = values
            .iter()
            .enumerate()
            .map(|(k, v)| format!("{:.2},{:.2}", frame.px(k as f64), frame.py(*v)))
            .collect();
        let _ = writeln!(
            out,
            r#"<polyline class="series" data-name="{}" fill="none" stroke="{}" stroke-width="1.5" points="{}"/>"#,
            escape(name),
            PALETTE[i % PALETTE.len()],
            points.join(" ")
        );
    }
    let names: Vec<&str> = series.iter().map(|(n, _)| n.as_str()).collect();
    legend(&mut out, &frame, &names);
    out.push_str("</svg>\n");
    out
}

/// Labelled points `(name, x, y)`.
pub fn scatter(title: &str, x_label: &str, y_label: &str, points: &[(String, f64, f64)], labels: bool) -> String {
    let frame = Frame::new(
        points.iter().map(|p| p.1),
        points.iter().map(|p| p.2),
        false,
    );
    let mut out = open();
    frame.axes(&mut out, title, x_label, y_label);
    for (i, (name, x, y)) in points.iter().enumerate() {
        let (cx, cy) = (frame.px(*x), frame.py(*y));
        let color = if labels { PALETTE[i % PALETTE.len()] } else { PALETTE[0] };
        let _ = writeln!(
            out,
            r#"<circle class="point" data-name="{}" cx="{cx:.2}" cy="{cy:.2}" r="4" fill="{color}"/>"#,
            escape(name)
        );
        if labels {
            let _ = writeln!(
                out,
                r#"<text x="{:.2}" y="{:.2}" font-size="11">{}</text>"#,
                cx + 6.0,
                cy - 6.0,
                escape(name)
            );
        }
    }
    out.push_str("</svg>\n");
    out
}
