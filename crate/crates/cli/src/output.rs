//! CSV, SVG and `key = value` emitters.

use std::fmt::Write as _;

/// 17 significant digits, enough to read back the same `f64`.
pub fn float(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn float_list(v: &[f64]) -> String {
    v.iter().map(|&x| float(x)).collect::<Vec<_>>().join(", ")
}

/// Comma-separated rows with a header and LF line endings.
pub struct Csv {
    text: String,
    columns: usize,
}

impl Csv {
    pub fn new<S: AsRef<str>>(header: &[S]) -> Self {
        let mut text = header
            .iter()
            .map(AsRef::as_ref)
            .collect::<Vec<_>>()
            .join(",");
        text.push('\n');
        Self {
            text,
            columns: header.len(),
        }
    }

    pub fn row_floats(&mut self, values: &[f64]) {
        debug_assert_eq!(values.len(), self.columns);
        let cells: Vec<String> = values.iter().map(|&v| float(v)).collect();
        self.row(&cells);
    }

    pub fn row<S: AsRef<str>>(&mut self, cells: &[S]) {
        debug_assert_eq!(cells.len(), self.columns);
        self.text += &cells
            .iter()
            .map(AsRef::as_ref)
            .collect::<Vec<_>>()
            .join(",");
        self.text.push('\n');
    }

    pub fn finish(self) -> String {
        self.text
    }
}

/// Ordered `key = value` lines.
#[derive(Default)]
pub struct KeyValues {
    text: String,
}

impl KeyValues {
    pub fn push(&mut self, key: &str, value: impl std::fmt::Display) {
        let _ = writeln!(self.text, "{key} = {value}");
    }

    pub fn finish(self) -> String {
        self.text
    }
}

const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf",
];

/// Line plot of several series over a shared time axis, as SVG 1.1.
pub fn svg_plot(title: &str, times: &[f64], series: &[(String, Vec<f64>)]) -> String {
    let (w, h) = (800.0, 450.0);
    let (left, right, top, bottom) = (60.0, 130.0, 40.0, 50.0);
    let (pw, ph) = (w - left - right, h - top - bottom);

    let t0 = times.first().copied().unwrap_or(0.0);
    let t1 = times.last().copied().unwrap_or(1.0).max(t0 + f64::EPSILON);
    let (mut lo, mut hi) = series
        .iter()
        .flat_map(|(_, v)| v.iter().copied())
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| {
            (a.min(v), b.max(v))
        });
    if !lo.is_finite() {
        (lo, hi) = (-1.0, 1.0);
    }
    if hi - lo < 1e-12 {
        (lo, hi) = (lo - 1.0, hi + 1.0);
    }
    let x_of = |t: f64| left + (t - t0) / (t1 - t0) * pw;
    let y_of = |v: f64| top + (hi - v) / (hi - lo) * ph;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<?xml version="1.0" encoding="UTF-8"?>
<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{w}" height="{h}" viewBox="0 0 {w} {h}">
<rect width="{w}" height="{h}" fill="white"/>
<text x="{}" y="24" font-family="sans-serif" font-size="16" text-anchor="middle">{}</text>"#,
        left + pw / 2.0,
        escape(title)
    );
    let _ = writeln!(
        s,
        r#"<g stroke="black" stroke-width="1"><line x1="{left}" y1="{0}" x2="{1}" y2="{0}"/><line x1="{left}" y1="{top}" x2="{left}" y2="{0}"/></g>"#,
        top + ph,
        left + pw
    );
    let zero = y_of(0.0);
    if (top..=top + ph).contains(&zero) {
        let _ = writeln!(
            s,
            r##"<line x1="{left}" y1="{zero:.2}" x2="{:.2}" y2="{zero:.2}" stroke="#bbbbbb" stroke-dasharray="4 3"/>"##,
            left + pw
        );
    }
    let label = |s: &mut String, x: f64, y: f64, anchor: &str, text: String| {
        let _ = writeln!(
            s,
            r#"<text x="{x:.2}" y="{y:.2}" font-family="sans-serif" font-size="11" text-anchor="{anchor}">{text}</text>"#
        );
    };
    for i in 0..=4 {
        let f = i as f64 / 4.0;
        label(
            &mut s,
            left + f * pw,
            top + ph + 16.0,
            "middle",
            format!("{:.3}", t0 + f * (t1 - t0)),
        );
        label(
            &mut s,
            left - 6.0,
            top + (1.0 - f) * ph + 4.0,
            "end",
            format!("{:.3}", lo + f * (hi - lo)),
        );
    }
    label(&mut s, left + pw / 2.0, h - 12.0, "middle", "t [s]".into());

    let stride = (times.len() / 2000).max(1);
    for (i, (name, values)) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let mut pts = String::new();
        for (j, (&t, &v)) in times.iter().zip(values).enumerate() {
            if (j % stride == 0 || j + 1 == times.len()) && v.is_finite() {
                let _ = write!(pts, "{:.2},{:.2} ", x_of(t), y_of(v));
            }
        }
        let _ = writeln!(
            s,
            r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
            pts.trim_end()
        );
        let ly = top + 14.0 + 18.0 * i as f64;
        let lx = left + pw + 12.0;
        let _ = writeln!(
            s,
            r#"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="2"/>"#,
            lx + 20.0
        );
        label(&mut s, lx + 26.0, ly + 4.0, "start", escape(name));
    }
    s.push_str("</svg>\n");
    s
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_round_trip() {
        for x in [0.1, -1.0 / 3.0, 6.02214076e23, f64::MIN_POSITIVE, 0.0] {
            assert_eq!(float(x).parse::<f64>().unwrap(), x);
        }
        assert_eq!(float(1.0), "1.0000000000000000e0");
    }

    #[test]
    fn csv_layout() {
        let mut c = Csv::new(&["a", "b"]);
        c.row_floats(&[1.0, 2.5]);
        assert_eq!(
            c.finish(),
            "a,b\n1.0000000000000000e0,2.5000000000000000e0\n"
        );
    }

    #[test]
    fn svg_has_one_polyline_per_series() {
        let t = vec![0.0, 1.0, 2.0];
        let s = svg_plot(
            "x < y",
            &t,
            &[
                ("x".into(), vec![0.0, 1.0, 0.5]),
                ("y".into(), vec![1.0; 3]),
            ],
        );
        assert_eq!(s.matches("<polyline").count(), 2);
        assert!(s.contains("x &lt; y"));
        assert!(s.trim_end().ends_with("</svg>"));
    }
}
