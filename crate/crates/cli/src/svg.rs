//! Minimal SVG charts: scatter plots, line charts and bar histograms.

use std::fmt::Write as _;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 480.0;
const MARGIN: f64 = 48.0;

const PALETTE: [&str; 10] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf",
];

/// How scatter points are colored.
pub enum Coloring<'a> {
    Uniform,
    /// Categorical labels, one palette entry per distinct label.
    Labels(&'a [i64]),
    /// Continuous values mapped onto a blue→red ramp.
    Values(&'a [f64]),
}

struct Frame {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
}

impl Frame {
    fn fit(xs: impl Iterator<Item = f64> + Clone, ys: impl Iterator<Item = f64> + Clone) -> Frame {
        let (x0, x1) = bounds(xs);
        let (y0, y1) = bounds(ys);
        Frame { x0, x1, y0, y1 }
    }

    fn px(&self, x: f64) -> f64 {
        MARGIN + (x - self.x0) / (self.x1 - self.x0) * (WIDTH - 2.0 * MARGIN)
    }

    fn py(&self, y: f64) -> f64 {
        HEIGHT - MARGIN - (y - self.y0) / (self.y1 - self.y0) * (HEIGHT - 2.0 * MARGIN)
    }
}

fn bounds(v: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = v
        .filter(|x| x.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), x| (lo.min(x), hi.max(x)));
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    if hi - lo < 1e-12 {
        return (lo - 0.5, hi + 0.5);
    }
    (lo, hi)
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

fn header(out: &mut String, title: &str, frame: &Frame) {
    writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    )
    .unwrap();
    writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#).unwrap();
    writeln!(
        out,
        r#"<text x="{}" y="24" text-anchor="middle" font-family="sans-serif" font-size="16">{}</text>"#,
        WIDTH / 2.0,
        escape(title)
    )
    .unwrap();
    writeln!(
        out,
        r#"<g class="axes" stroke="black" fill="none"><rect x="{MARGIN}" y="{MARGIN}" width="{}" height="{}"/></g>"#,
        WIDTH - 2.0 * MARGIN,
        HEIGHT - 2.0 * MARGIN
    )
    .unwrap();
    writeln!(
        out,
        r#"<g class="ticks" font-family="sans-serif" font-size="11"><text x="{MARGIN}" y="{}">{:.3}</text><text x="{}" y="{}" text-anchor="end">{:.3}</text><text x="4" y="{}">{:.3}</text><text x="4" y="{}">{:.3}</text></g>"#,
        HEIGHT - MARGIN + 16.0,
        frame.x0,
        WIDTH - MARGIN,
        HEIGHT - MARGIN + 16.0,
        frame.x1,
        HEIGHT - MARGIN,
        frame.y0,
        MARGIN + 4.0,
        frame.y1
    )
    .unwrap();
}

fn ramp(t: f64) -> String {
    let t = t.clamp(0.0, 1.0);
    let r = (255.0 * t) as u8;
    let b = (255.0 * (1.0 - t)) as u8;
    format!("#{r:02x}40{b:02x}")
}

/// Scatter plot with one `<circle>` per point.
pub fn scatter(title: &str, xs: &[f64], ys: &[f64], coloring: &Coloring) -> String {
    let frame = Frame::fit(xs.iter().copied(), ys.iter().copied());
    let mut out = String::new();
    header(&mut out, title, &frame);
    let mut labels: Vec<i64> = match coloring {
        Coloring::Labels(l) => l.to_vec(),
        _ => Vec::new(),
    };
    labels.sort_unstable();
    labels.dedup();
    let (v0, v1) = match coloring {
        Coloring::Values(v) => bounds(v.iter().copied()),
        _ => (0.0, 1.0),
    };
    out.push_str("<g class=\"points\">\n");
    for i in 0..xs.len() {
        let color = match coloring {
            Coloring::Uniform => PALETTE[0].to_string(),
            Coloring::Labels(l) => PALETTE[labels.binary_search(&l[i]).unwrap() % PALETTE.len()].to_string(),
            Coloring::Values(v) => ramp((v[i] - v0) / (v1 - v0)),
        };
        writeln!(
            out,
            r#"<circle cx="{:.2}" cy="{:.2}" r="2.5" fill="{color}"/>"#,
            frame.px(xs[i]),
            frame.py(ys[i])
        )
        .unwrap();
    }
    out.push_str("</g>\n</svg>\n");
    out
}

/// One `<polyline>` per named series over shared x positions.
pub fn lines(title: &str, xs: &[f64], series: &[(String, Vec<f64>)]) -> String {
    let frame = Frame::fit(xs.iter().copied(), series.iter().flat_map(|s| s.1.iter().copied()));
    let mut out = String::new();
    header(&mut out, title, &frame);
    out.push_str("<g class=\"series\" fill=\"none\" stroke-width=\"2\">\n");
    for (k, (name, ys)) in series.iter().enumerate() {
        let pts: Vec<String> = xs
            .iter()
            .zip(ys)
            .map(|(&x, &y)| format!("{:.2},{:.2}", frame.px(x), frame.py(y)))
            .collect();
        let color = PALETTE[k % PALETTE.len()];
        writeln!(
            out,
            r#"<polyline points="{}" stroke="{color}"><title>{}</title></polyline>"#,
            pts.join(" "),
            escape(name)
        )
        .unwrap();
        writeln!(
            out,
            r#"<text x="{}" y="{}" fill="{color}" font-family="sans-serif" font-size="12">{}</text>"#,
            WIDTH - MARGIN - 80.0,
            MARGIN + 16.0 * (k as f64 + 1.0),
            escape(name)
        )
        .unwrap();
    }
    out.push_str("</g>\n</svg>\n");
    out
}

/// One `<rect>` per bin.
pub fn bars(title: &str, edges: &[f64], counts: &[usize]) -> String {
    let top = counts.iter().copied().max().unwrap_or(0) as f64;
    let frame = Frame {
        x0: edges.first().copied().unwrap_or(0.0),
        x1: edges.last().copied().unwrap_or(1.0).max(edges.first().copied().unwrap_or(0.0) + 1e-12),
        y0: 0.0,
        y1: top.max(1.0),
    };
    let mut out = String::new();
    header(&mut out, title, &frame);
    out.push_str("<g class=\"bars\" fill=\"#1f77b4\" stroke=\"white\">\n");
    for (i, &c) in counts.iter().enumerate() {
        let x = frame.px(edges[i]);
        let w = frame.px(edges[i + 1]) - x;
        let y = frame.py(c as f64);
        writeln!(
            out,
            r#"<rect x="{x:.2}" y="{y:.2}" width="{w:.2}" height="{:.2}"><title>{c}</title></rect>"#,
            frame.py(0.0) - y
        )
        .unwrap();
    }
    out.push_str("</g>\n</svg>\n");
    out
}
