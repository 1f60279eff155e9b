//! Minimal deterministic SVG charts. Numbers are printed with fixed
//! precision so equal inputs give byte-identical files.

use std::fmt::Write;

const WIDTH: f64 = 640.0;
const PALETTE: [&str; 8] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

fn num(v: f64) -> String {
    let s = format!("{v:.2}");
    if s == "-0.00" {
        "0.00".into()
    } else {
        s
    }
}

struct Doc {
    body: String,
    height: f64,
}

impl Doc {
    fn new(title: &str, height: f64) -> Self {
        let mut d = Doc {
            body: String::new(),
            height,
        };
        d.text(WIDTH / 2.0, 20.0, title, "middle", 14);
        d
    }

    fn text(&mut self, x: f64, y: f64, s: &str, anchor: &str, size: u32) {
        let _ = writeln!(
            self.body,
            r#"<text x="{}" y="{}" text-anchor="{anchor}" font-size="{size}">{}</text>"#,
            num(x),
            num(y),
            escape(s)
        );
    }

    fn line(&mut self, x1: f64, y1: f64, x2: f64, y2: f64, stroke: &str) {
        let _ = writeln!(
            self.body,
            r#"<line x1="{}" y1="{}" x2="{}" y2="{}" stroke="{stroke}"/>"#,
            num(x1),
            num(y1),
            num(x2),
            num(y2)
        );
    }

    fn rect(&mut self, x: f64, y: f64, w: f64, h: f64, fill: &str) {
        let _ = writeln!(
            self.body,
            r#"<rect x="{}" y="{}" width="{}" height="{}" fill="{fill}"/>"#,
            num(x),
            num(y),
            num(w.max(0.0)),
            num(h.max(0.0))
        );
    }

    fn finish(self) -> String {
        format!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{}\" height=\"{}\" font-family=\"sans-serif\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n{}</svg>\n",
            num(WIDTH),
            num(self.height),
            self.body
        )
    }
}

fn extent(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if !lo.is_finite() {
        (0.0, 1.0)
    } else if hi - lo < 1e-12 {
        (lo - 0.5, hi + 0.5)
    } else {
        (lo, hi)
    }
}

/// Horizontal bars around a zero axis, positive green and negative red.
/// `items` are drawn top to bottom in the given order.
pub fn signed_bars(title: &str, items: &[(String, f64)]) -> String {
    let row = 22.0;
    let top = 40.0;
    let mut doc = Doc::new(title, top + row * items.len() as f64 + 30.0);
    let left = 220.0;
    // Room for the value labels beyond the longest bars.
    let label = 55.0;
    let right = WIDTH - label;
    let max = items.iter().map(|(_, v)| v.abs()).fold(0.0, f64::max).max(1e-12);
    let has_neg = items.iter().any(|(_, v)| *v < 0.0);
    let zero = if has_neg { (left + label + right) / 2.0 } else { left };
    let span = right - zero;
    for (i, (name, v)) in items.iter().enumerate() {
        let y = top + row * i as f64;
        let len = v.abs() / max * span;
        let (x, fill) = if *v >= 0.0 { (zero, "#2ca02c") } else { (zero - len, "#d62728") };
        doc.rect(x, y + 3.0, len, row - 6.0, fill);
        doc.text(left - 6.0, y + row * 0.7, name, "end", 11);
        doc.text(if *v >= 0.0 { zero + len + 3.0 } else { zero - len - 3.0 }, y + row * 0.7, &format!("{v:.4}"), if *v >= 0.0 { "start" } else { "end" }, 9);
    }
    doc.line(zero, top, zero, top + row * items.len() as f64, "#000000");
    doc.finish()
}

/// Non-negative horizontal bars.
pub fn bars(title: &str, items: &[(String, f64)]) -> String {
    let clipped: Vec<(String, f64)> = items.iter().map(|(n, v)| (n.clone(), v.max(0.0))).collect();
    signed_bars(title, &clipped)
}

pub struct Axes<'a> {
    pub x_label: &'a str,
    pub y_label: &'a str,
}

const PLOT: (f64, f64, f64, f64) = (70.0, 40.0, WIDTH - 20.0, 400.0);

fn frame(doc: &mut Doc, axes: &Axes<'_>, (x0, x1): (f64, f64), (y0, y1): (f64, f64)) {
    let (l, t, r, b) = PLOT;
    doc.line(l, b, r, b, "#000000");
    doc.line(l, t, l, b, "#000000");
    doc.text((l + r) / 2.0, b + 35.0, axes.x_label, "middle", 12);
    doc.text(l - 40.0, t - 12.0, axes.y_label, "start", 12);
    for i in 0..=4 {
        let f = i as f64 / 4.0;
        let xv = x0 + f * (x1 - x0);
        let yv = y0 + f * (y1 - y0);
        doc.text(l + f * (r - l), b + 15.0, &format!("{xv:.3}"), "middle", 9);
        doc.text(l - 4.0, b - f * (b - t) + 3.0, &format!("{yv:.3}"), "end", 9);
    }
}

fn scale(v: f64, (lo, hi): (f64, f64), (a, b): (f64, f64)) -> f64 {
    a + (v - lo) / (hi - lo) * (b - a)
}

/// One polyline per series over shared `x`. The first `highlight` series are
/// drawn thick, the rest thin and grey.
pub fn lines(title: &str, axes: &Axes<'_>, x: &[f64], series: &[Vec<f64>], highlight: usize) -> String {
    let mut doc = Doc::new(title, PLOT.3 + 50.0);
    let xr = extent(x.iter().copied());
    let yr = extent(series.iter().flatten().copied());
    frame(&mut doc, axes, xr, yr);
    let (l, t, r, b) = PLOT;
    for (k, s) in series.iter().enumerate().rev() {
        let pts: Vec<String> = x
            .iter()
            .zip(s)
            .map(|(&xv, &yv)| format!("{},{}", num(scale(xv, xr, (l, r))), num(scale(yv, yr, (b, t)))))
            .collect();
        let (stroke, width) = if k < highlight { (PALETTE[k % PALETTE.len()], 2.0) } else { ("#bbbbbb", 0.6) };
        let _ = writeln!(
            doc.body,
            r#"<polyline fill="none" stroke="{stroke}" stroke-width="{}" points="{}"/>"#,
            num(width),
            pts.join(" ")
        );
    }
    doc.finish()
}

/// Points colored by `color` class and shaped by `marker` class (circle when
/// equal to the color class, cross otherwise).
pub fn scatter(title: &str, axes: &Axes<'_>, points: &[(f64, f64)], color: &[usize], marker: &[usize], legend: &[String]) -> String {
    let mut doc = Doc::new(title, PLOT.3 + 50.0 + 16.0 * legend.len() as f64);
    let xr = extent(points.iter().map(|p| p.0));
    let yr = extent(points.iter().map(|p| p.1));
    frame(&mut doc, axes, xr, yr);
    let (l, t, r, b) = PLOT;
    for (i, &(px, py)) in points.iter().enumerate() {
        let cx = scale(px, xr, (l + 5.0, r - 5.0));
        let cy = scale(py, yr, (b - 5.0, t + 5.0));
        let fill = PALETTE[color[i] % PALETTE.len()];
        if marker[i] == color[i] {
            let _ = writeln!(doc.body, r#"<circle cx="{}" cy="{}" r="3" fill="{fill}"/>"#, num(cx), num(cy));
        } else {
            let d = 4.0;
            let _ = writeln!(
                doc.body,
                r#"<path d="M{} {}L{} {}M{} {}L{} {}" stroke="{fill}" stroke-width="2"/>"#,
                num(cx - d),
                num(cy - d),
                num(cx + d),
                num(cy + d),
                num(cx - d),
                num(cy + d),
                num(cx + d),
                num(cy - d)
            );
        }
    }
    for (k, name) in legend.iter().enumerate() {
        let y = b + 50.0 + 16.0 * k as f64;
        doc.rect(l, y - 9.0, 10.0, 10.0, PALETTE[k % PALETTE.len()]);
        doc.text(l + 15.0, y, name, "start", 11);
    }
    doc.text(r, b + 50.0, "o = predicted as true label, x = misclassified", "end", 10);
    doc.finish()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn escapes_and_is_deterministic() {
        let items = vec![("Age > 70".to_string(), 0.3), ("a<b".to_string(), -0.1)];
        let a = signed_bars("w & v", &items);
        assert_eq!(a, signed_bars("w & v", &items));
        assert!(a.contains("Age &gt; 70") && a.contains("a&lt;b") && a.contains("w &amp; v"));
        assert!(a.contains("#d62728") && a.contains("#2ca02c"));
        assert!(a.starts_with("<svg") && a.ends_with("</svg>\n"));
    }

    #[test]
    fn plots_render_every_item() {
        let axes = Axes { x_label: "x", y_label: "y" };
        let l = lines("t", &axes, &[0.0, 1.0], &[vec![0.0, 1.0], vec![1.0, 1.0]], 1);
        assert_eq!(l.matches("<polyline").count(), 2);
        let s = scatter("t", &axes, &[(0.0, 0.0), (1.0, 1.0)], &[0, 1], &[0, 0], &["a".into(), "b".into()]);
        assert_eq!(s.matches("<circle").count(), 1);
        assert_eq!(s.matches("<path").count(), 1);
        assert!(!num(-0.0001).starts_with('-'));
    }
}
