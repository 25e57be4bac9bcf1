// SPDX-License-Identifier: MIT OR Apache-2.0

//! Plain SVG line and box charts for accuracy curves.

use std::fmt::Write;

use binsight_core::evaluation::CurvePoint;

const W: f64 = 760.0;
const H: f64 = 420.0;
const LEFT: f64 = 60.0;
const RIGHT: f64 = 170.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 50.0;
const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"];

struct Frame {
    x: (f64, f64),
    y: (f64, f64),
    svg: String,
}

impl Frame {
    fn new(title: &str, x: (f64, f64), y: (f64, f64), y_label: &str) -> Self {
        let mut svg = String::new();
        let _ = writeln!(
            svg,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
        );
        let _ = writeln!(svg, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="22" text-anchor="middle" font-size="14">{}</text>"#,
            (LEFT + W - RIGHT) / 2.0,
            escape(title)
        );
        let mut frame = Frame { x, y, svg };
        frame.axes(y_label);
        frame
    }

    fn px(&self, x: f64) -> f64 {
        LEFT + (x - self.x.0) / (self.x.1 - self.x.0).max(f64::EPSILON) * (W - LEFT - RIGHT)
    }

    fn py(&self, y: f64) -> f64 {
        H - BOTTOM - (y - self.y.0) / (self.y.1 - self.y.0).max(f64::EPSILON) * (H - TOP - BOTTOM)
    }

    fn axes(&mut self, y_label: &str) {
        let (x0, x1, y0, y1) = (LEFT, W - RIGHT, TOP, H - BOTTOM);
        let _ = writeln!(
            self.svg,
            r#"<path d="M{x0},{y0} L{x0},{y1} L{x1},{y1}" fill="none" stroke="black"/>"#
        );
        for i in 0..=5 {
            let v = self.y.0 + (self.y.1 - self.y.0) * i as f64 / 5.0;
            let py = self.py(v);
            let _ = writeln!(
                self.svg,
                r##"<line x1="{x0}" y1="{py:.1}" x2="{x1}" y2="{py:.1}" stroke="#ddd"/><text x="{}" y="{:.1}" text-anchor="end">{v:.2}</text>"##,
                x0 - 6.0,
                py + 4.0
            );
        }
        let span = self.x.1 - self.x.0;
        let step = [1.0, 2.0, 5.0, 10.0, 20.0, 50.0, 100.0]
            .into_iter()
            .find(|s| span / s <= 10.0)
            .unwrap_or(span / 10.0);
        let mut v = (self.x.0 / step).ceil() * step;
        while v <= self.x.1 + 1e-9 {
            let px = self.px(v);
            let _ = writeln!(
                self.svg,
                r#"<text x="{px:.1}" y="{}" text-anchor="middle">{v}</text>"#,
                y1 + 18.0
            );
            v += step;
        }
        let _ = writeln!(
            self.svg,
            r#"<text x="{}" y="{}" text-anchor="middle">number of indicators</text>"#,
            (x0 + x1) / 2.0,
            H - 12.0
        );
        let _ = writeln!(
            self.svg,
            r#"<text x="16" y="{}" text-anchor="middle" transform="rotate(-90 16 {})">{}</text>"#,
            (y0 + y1) / 2.0,
            (y0 + y1) / 2.0,
            escape(y_label)
        );
    }

    fn legend(&mut self, slot: usize, name: &str, color: &str) {
        let x = W - RIGHT + 15.0;
        let y = TOP + 10.0 + 20.0 * slot as f64;
        let _ = writeln!(
            self.svg,
            r#"<line x1="{x}" y1="{y}" x2="{}" y2="{y}" stroke="{color}" stroke-width="2"/><text x="{}" y="{}">{}</text>"#,
            x + 20.0,
            x + 26.0,
            y + 4.0,
            escape(name)
        );
    }

    fn line(&mut self, points: &[(f64, f64)], color: &str, markers: bool) {
        let path: Vec<String> = points
            .iter()
            .filter(|p| p.1.is_finite())
            .map(|&(x, y)| format!("{:.1},{:.1}", self.px(x), self.py(y)))
            .collect();
        if markers {
            for p in &path {
                let (cx, cy) = p.split_once(',').unwrap_or(("0", "0"));
                let _ = writeln!(
                    self.svg,
                    r#"<circle cx="{cx}" cy="{cy}" r="2.5" fill="none" stroke="{color}"/>"#
                );
            }
        } else {
            let _ = writeln!(
                self.svg,
                r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"#,
                path.join(" ")
            );
        }
    }

    fn boxplot(&mut self, x: f64, half_width: f64, values: &[f64], color: &str) {
        let mut v: Vec<f64> = values.iter().copied().filter(|a| a.is_finite()).collect();
        if v.is_empty() {
            return;
        }
        v.sort_by(f64::total_cmp);
        let q = |p: f64| quantile(&v, p);
        let (lo, q1, med, q3, hi) = (v[0], q(0.25), q(0.5), q(0.75), v[v.len() - 1]);
        let (l, r, c) = (self.px(x - half_width), self.px(x + half_width), self.px(x));
        let _ = writeln!(
            self.svg,
            r#"<line x1="{c:.1}" y1="{:.1}" x2="{c:.1}" y2="{:.1}" stroke="{color}"/><rect x="{l:.1}" y="{:.1}" width="{:.1}" height="{:.1}" fill="white" stroke="{color}"/><line x1="{l:.1}" y1="{:.1}" x2="{r:.1}" y2="{:.1}" stroke="{color}" stroke-width="2"/>"#,
            self.py(lo),
            self.py(hi),
            self.py(q3),
            (r - l).max(0.5),
            (self.py(q1) - self.py(q3)).max(0.5),
            self.py(med),
            self.py(med)
        );
    }

    fn finish(mut self) -> String {
        self.svg.push_str("</svg>\n");
        self.svg
    }
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Linear-interpolation quantile of sorted values.
pub fn quantile(sorted: &[f64], p: f64) -> f64 {
    let pos = p * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

fn k_range(curve: &[CurvePoint]) -> (f64, f64) {
    let lo = curve.iter().map(|p| p.k).min().unwrap_or(1) as f64;
    let hi = curve.iter().map(|p| p.k).max().unwrap_or(1) as f64;
    (lo - 0.5, hi + 0.5)
}

fn y_range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    let lo = ((lo - 0.02) * 20.0).floor() / 20.0;
    let hi = ((hi + 0.02) * 20.0).ceil() / 20.0;
    (lo.max(0.0), hi.min(1.0).max(lo + 0.05))
}

/// Accuracy lines, per-class error lines and forest box plots.
pub fn curve_charts(title: &str, curve: &[CurvePoint]) -> Vec<(String, String)> {
    let xs = k_range(curve);
    let series: Vec<(&str, Vec<(f64, f64)>, bool)> = vec![
        ("NB learning", curve.iter().map(|p| (p.k as f64, p.nb.train_accuracy)).collect(), true),
        ("NB test mean", curve.iter().map(|p| (p.k as f64, p.nb.mean)).collect(), false),
        ("RF learning", curve.iter().map(|p| (p.k as f64, p.rf.train_accuracy)).collect(), true),
        (
            "RF out-of-bag",
            curve
                .iter()
                .map(|p| (p.k as f64, p.rf.oob_accuracy.unwrap_or(f64::NAN)))
                .collect(),
            false,
        ),
        ("RF test mean", curve.iter().map(|p| (p.k as f64, p.rf.mean)).collect(), false),
    ];
    let ys = y_range(series.iter().flat_map(|s| s.1.iter().map(|p| p.1)));
    let mut acc = Frame::new(&format!("{title} accuracy"), xs, ys, "accuracy");
    for (i, (name, points, markers)) in series.iter().enumerate() {
        acc.line(points, COLORS[i], *markers);
        acc.legend(i, name, COLORS[i]);
    }

    let mut err = Frame::new(&format!("{title} NB per-class test error"), xs, (0.0, 1.0), "error rate");
    for (c, name) in ["no change", "variance", "mean", "trend"].iter().enumerate() {
        let points: Vec<(f64, f64)> = curve.iter().map(|p| (p.k as f64, p.nb.per_class_error[c])).collect();
        err.line(&points, COLORS[c], false);
        err.legend(c, name, COLORS[c]);
    }

    let ys = y_range(curve.iter().flat_map(|p| p.rf.subset_accuracies.iter().copied()));
    let mut boxes = Frame::new(&format!("{title} RF test subsets"), xs, ys, "accuracy");
    for p in curve {
        boxes.boxplot(p.k as f64, 0.3, &p.rf.subset_accuracies, COLORS[0]);
    }
    boxes.legend(0, "RF test", COLORS[0]);

    vec![
        ("accuracy".to_string(), acc.finish()),
        ("errors".to_string(), err.finish()),
        ("box".to_string(), boxes.finish()),
    ]
}

/// Side-by-side forest test-subset box plots for two curves.
pub fn paired_box_chart(title: &str, a: (&str, &[CurvePoint]), b: (&str, &[CurvePoint])) -> String {
    let mut all = a.1.to_vec();
    all.extend_from_slice(b.1);
    let xs = k_range(&all);
    let ys = y_range(all.iter().flat_map(|p| p.rf.subset_accuracies.iter().copied()));
    let mut frame = Frame::new(title, xs, ys, "accuracy");
    for (slot, (name, curve), shift) in [(0, a, -0.2), (1, b, 0.2)] {
        for p in curve {
            frame.boxplot(p.k as f64 + shift, 0.18, &p.rf.subset_accuracies, COLORS[slot]);
        }
        frame.legend(slot, name, COLORS[slot]);
    }
    frame.finish()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quantiles() {
        let v = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(quantile(&v, 0.0), 1.0);
        assert_eq!(quantile(&v, 1.0), 4.0);
        assert_eq!(quantile(&v, 0.5), 2.5);
    }

    #[test]
    fn ranges() {
        assert_eq!(y_range([0.81, 0.93].into_iter()), (0.75, 0.95));
        assert_eq!(y_range(std::iter::empty()), (0.0, 1.0));
    }
}
