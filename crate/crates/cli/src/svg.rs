// SPDX-License-Identifier: MIT OR Apache-2.0

//! Minimal hand-written SVG plots.

use std::fmt::Write;

const W: f64 = 720.0;
const H: f64 = 420.0;
const PAD: f64 = 56.0;

const PALETTE: [&str; 8] = ["#d62728", "#ff7f0e", "#2ca02c", "#1f77b4", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"];

pub fn level_color(level: Option<usize>) -> &'static str {
    match level {
        Some(l) if l >= 1 => PALETTE[(l - 1).min(PALETTE.len() - 1)],
        _ => "#bbbbbb",
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// Linear map of `[lo, hi]` onto `[a, b]`, tolerating an empty range.
#[derive(Clone, Copy)]
struct Axis {
    lo: f64,
    hi: f64,
    a: f64,
    b: f64,
}

impl Axis {
    fn new(values: impl IntoIterator<Item = f64>, a: f64, b: f64) -> Self {
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for v in values.into_iter().filter(|v| v.is_finite()) {
            lo = lo.min(v);
            hi = hi.max(v);
        }
        if !lo.is_finite() {
            (lo, hi) = (0.0, 1.0);
        }
        if hi - lo < 1e-12 {
            lo -= 0.5;
            hi += 0.5;
        }
        let pad = 0.04 * (hi - lo);
        Self { lo: lo - pad, hi: hi + pad, a, b }
    }

    fn map(&self, v: f64) -> f64 {
        self.a + (v - self.lo) / (self.hi - self.lo) * (self.b - self.a)
    }
}

struct Canvas {
    out: String,
}

impl Canvas {
    fn new(title: &str) -> Self {
        let mut out = String::new();
        let _ = writeln!(
            out,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
        );
        let _ = writeln!(out, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
        let _ = writeln!(out, r#"<text x="{}" y="22" text-anchor="middle" font-size="14">{}</text>"#, W / 2.0, escape(title));
        Self { out }
    }

    fn frame(&mut self, x: &Axis, y: &Axis, xlabel: &str, ylabel: &str) {
        let _ = writeln!(
            self.out,
            r##"<rect x="{PAD}" y="{PAD}" width="{}" height="{}" fill="none" stroke="#333"/>"##,
            W - 2.0 * PAD,
            H - 2.0 * PAD
        );
        for (v, anchor) in [(x.lo, "start"), (x.hi, "end")] {
            let _ = writeln!(self.out, r#"<text x="{:.1}" y="{:.1}" text-anchor="{anchor}">{}</text>"#, x.map(v), H - PAD + 16.0, fmt(v));
        }
        for v in [y.lo, y.hi] {
            let _ = writeln!(self.out, r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{}</text>"#, PAD - 4.0, y.map(v) + 4.0, fmt(v));
        }
        let _ = writeln!(self.out, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, W / 2.0, H - 12.0, escape(xlabel));
        let _ = writeln!(
            self.out,
            r#"<text x="16" y="{}" text-anchor="middle" transform="rotate(-90 16 {})">{}</text>"#,
            H / 2.0,
            H / 2.0,
            escape(ylabel)
        );
    }

    fn circle(&mut self, x: f64, y: f64, r: f64, fill: &str, title: Option<&str>) {
        match title {
            Some(t) => {
                let _ = writeln!(self.out, r#"<circle cx="{x:.2}" cy="{y:.2}" r="{r}" fill="{fill}"><title>{}</title></circle>"#, escape(t));
            }
            None => {
                let _ = writeln!(self.out, r#"<circle cx="{x:.2}" cy="{y:.2}" r="{r}" fill="{fill}"/>"#);
            }
        }
    }

    fn line(&mut self, x1: f64, y1: f64, x2: f64, y2: f64, stroke: &str, extra: &str) {
        let _ = writeln!(self.out, r#"<line x1="{x1:.2}" y1="{y1:.2}" x2="{x2:.2}" y2="{y2:.2}" stroke="{stroke}" {extra}/>"#);
    }

    fn finish(mut self) -> String {
        self.out.push_str("</svg>\n");
        self.out
    }
}

fn fmt(v: f64) -> String {
    if v != 0.0 && (v.abs() < 1e-2 || v.abs() >= 1e5) {
        format!("{v:.2e}")
    } else {
        format!("{v:.3}")
    }
}

/// One coarse-series day for [`series_plot`].
pub struct SeriesPoint {
    pub index: usize,
    pub value: f64,
    pub censored: bool,
}

/// Daily maxima on a log scale with the fitted segment scales `1/λ` as steps
/// and dashed lines at each break.
pub fn series_plot(title: &str, points: &[SeriesPoint], segments: &[(usize, usize, f64)]) -> String {
    let mut c = Canvas::new(title);
    let logs = points.iter().map(|p| p.value.log10()).chain(segments.iter().map(|s| (1.0 / s.2).log10()));
    let x = Axis::new([0.0, points.len().max(1) as f64], PAD, W - PAD);
    let y = Axis::new(logs, H - PAD, PAD);
    c.frame(&x, &y, "day index", "log10 daily maximum");
    for p in points {
        let fill = if p.censored { "#aaaaaa" } else { "#1f77b4" };
        c.circle(x.map(p.index as f64), y.map(p.value.log10()), 1.8, fill, None);
    }
    for (i, &(a, b, rate)) in segments.iter().enumerate() {
        let level = y.map((1.0 / rate).log10());
        c.line(x.map(a as f64), level, x.map(b as f64), level, "#d62728", r#"stroke-width="2""#);
        if i > 0 {
            c.line(x.map(a as f64), PAD, x.map(a as f64), H - PAD, "#333", r#"stroke-dasharray="4 3""#);
        }
    }
    c.finish()
}

/// Score-versus-complexity curve with the selected point ringed.
pub fn elbow_plot(title: &str, xlabel: &str, ylabel: &str, points: &[(f64, f64)], selected: Option<usize>) -> String {
    let mut c = Canvas::new(title);
    let x = Axis::new(points.iter().map(|p| p.0), PAD, W - PAD);
    let y = Axis::new(points.iter().map(|p| p.1), H - PAD, PAD);
    c.frame(&x, &y, xlabel, ylabel);
    let path: Vec<String> = points.iter().map(|p| format!("{:.2},{:.2}", x.map(p.0), y.map(p.1))).collect();
    let _ = writeln!(c.out, r##"<polyline points="{}" fill="none" stroke="#1f77b4"/>"##, path.join(" "));
    for (i, p) in points.iter().enumerate() {
        c.circle(x.map(p.0), y.map(p.1), 3.0, "#1f77b4", None);
        if selected == Some(i) {
            let _ = writeln!(
                c.out,
                r##"<circle cx="{:.2}" cy="{:.2}" r="8" fill="none" stroke="#d62728" stroke-width="2"/>"##,
                x.map(p.0),
                y.map(p.1)
            );
        }
    }
    c.finish()
}

/// One cluster for [`pareto_plot`].
pub struct ScorePoint {
    pub id: usize,
    pub w: f64,
    pub i: f64,
    pub level: Option<usize>,
}

/// Heterogeneity against intensity, coloured by Pareto level.
pub fn pareto_plot(title: &str, points: &[ScorePoint]) -> String {
    let mut c = Canvas::new(title);
    let x = Axis::new(points.iter().map(|p| p.w), PAD, W - PAD);
    let y = Axis::new(points.iter().map(|p| p.i), H - PAD, PAD);
    c.frame(&x, &y, "heterogeneity W", "intensity I");
    for p in points {
        let label = match p.level {
            Some(l) => format!("cluster {} (level {l})", p.id),
            None => format!("cluster {} (unranked)", p.id),
        };
        let (px, py) = (x.map(p.w), y.map(p.i));
        c.circle(px, py, 5.0, level_color(p.level), Some(&label));
        let _ = writeln!(c.out, r#"<text x="{:.2}" y="{:.2}">{}</text>"#, px + 7.0, py - 5.0, p.id);
    }
    c.finish()
}

/// One station for [`station_map`].
pub struct MapStation {
    pub id: String,
    pub x: f64,
    pub y: f64,
    pub level: Option<usize>,
    pub cluster: Option<usize>,
}

/// Stations at their coordinates, coloured by the level of their cluster.
pub fn station_map(title: &str, stations: &[MapStation]) -> String {
    let mut c = Canvas::new(title);
    // equal scale on both axes
    let (xs, ys): (Vec<f64>, Vec<f64>) = stations.iter().map(|s| (s.x, s.y)).unzip();
    let xa = Axis::new(xs.iter().copied(), 0.0, 1.0);
    let ya = Axis::new(ys.iter().copied(), 0.0, 1.0);
    let span = (xa.hi - xa.lo).max(ya.hi - ya.lo);
    let scale = ((W - 2.0 * PAD).min(H - 2.0 * PAD)) / span;
    let (cx, cy) = ((xa.lo + xa.hi) / 2.0, (ya.lo + ya.hi) / 2.0);
    for s in stations {
        let px = W / 2.0 + (s.x - cx) * scale;
        let py = H / 2.0 - (s.y - cy) * scale;
        let label = match s.cluster {
            Some(k) => format!("{} (cluster {k})", s.id),
            None => format!("{} (inactive)", s.id),
        };
        c.circle(px, py, 5.0, level_color(s.level), Some(&label));
    }
    c.finish()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn plots_are_well_formed() {
        let pts: Vec<_> = (0..10).map(|i| SeriesPoint { index: i, value: 1.0 + i as f64, censored: i % 3 == 0 }).collect();
        let s = series_plot("a < b", &pts, &[(0, 5, 0.5), (5, 10, 0.1)]);
        assert!(s.starts_with("<svg") && s.ends_with("</svg>\n"));
        assert!(s.contains("a &lt; b"));
        assert_eq!(s.matches("stroke-dasharray").count(), 1);

        let e = elbow_plot("t", "x", "y", &[(1.0, 5.0), (2.0, 2.0), (3.0, 1.5)], Some(1));
        assert_eq!(e.matches(r#"r="8""#).count(), 1);

        let p = pareto_plot("t", &[ScorePoint { id: 0, w: 1.0, i: 1.0, level: Some(1) }]);
        assert!(p.contains(level_color(Some(1))));

        let m = station_map("t", &[MapStation { id: "a".into(), x: 0.0, y: 0.0, level: None, cluster: None }]);
        assert!(m.contains("inactive"));
    }
}
