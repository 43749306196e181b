//! Minimal SVG scatter of a contour export.

use std::fmt::Write as _;
use std::path::Path;

use anyhow::{Context, Result};
use pmivec::contours::ContourRow;

const SIZE: f64 = 600.0;
const MARGIN: f64 = 50.0;
const COLORS: [&str; 6] = ["#1f77b4", "#2ca02c", "#d62728", "#9467bd", "#ff7f0e", "#8c564b"];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

pub fn render_svg(rows: &[ContourRow], context_point: (f64, f64), context: &str) -> String {
    let xs = rows.iter().map(|r| r.x).chain([0.0, context_point.0]);
    let ys = rows.iter().map(|r| r.y).chain([0.0, context_point.1]);
    let (x0, x1) = xs.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    let (y0, y1) = ys.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    let span = (x1 - x0).max(y1 - y0).max(1e-12);
    let inner = SIZE - 2.0 * MARGIN;
    let px = |x: f64| MARGIN + (x - x0) / span * inner;
    let py = |y: f64| SIZE - MARGIN - (y - y0) / span * inner;

    let mut centers: Vec<f64> = rows.iter().map(|r| r.bucket).collect();
    centers.sort_by(f64::total_cmp);
    centers.dedup();

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{SIZE}" height="{SIZE}" viewBox="0 0 {SIZE} {SIZE}">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="black" stroke-width="1.5"/>"#,
        px(0.0),
        py(0.0),
        px(context_point.0),
        py(context_point.1)
    );
    for r in rows {
        let k = centers.iter().position(|&c| c == r.bucket).unwrap_or(0);
        let _ = writeln!(
            s,
            r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="{}" fill-opacity="0.7"><title>{} ({})</title></circle>"#,
            px(r.x),
            py(r.y),
            COLORS[k % COLORS.len()],
            escape(&r.word),
            r.log_prob
        );
    }
    for (k, c) in centers.iter().enumerate() {
        let y = 20.0 + 16.0 * k as f64;
        let _ = writeln!(
            s,
            r#"<circle cx="{}" cy="{y}" r="4" fill="{}"/><text x="{}" y="{}" font-size="12" font-family="sans-serif">log p = {c}</text>"#,
            SIZE - 130.0,
            COLORS[k % COLORS.len()],
            SIZE - 120.0,
            y + 4.0
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{MARGIN}" y="20" font-size="13" font-family="sans-serif">projection onto c({})</text>"#,
        escape(context)
    );
    s.push_str("</svg>\n");
    s
}

pub fn write_svg(path: &Path, rows: &[ContourRow], context_point: (f64, f64), context: &str) -> Result<()> {
    std::fs::write(path, render_svg(rows, context_point, context))
        .with_context(|| format!("{}: cannot write plot", path.display()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_marker_per_row() {
        let rows = vec![
            ContourRow { word: "a<b".into(), x: 1.0, y: 0.5, bucket: -2.0, log_prob: -2.1 },
            ContourRow { word: "c".into(), x: -1.0, y: 2.0, bucket: -1.0, log_prob: -0.9 },
        ];
        let svg = render_svg(&rows, (3.0, 0.0), "ctx");
        assert_eq!(svg.matches("<title>").count(), 2);
        assert!(svg.contains("a&lt;b"));
        assert!(svg.ends_with("</svg>\n"));
    }

    #[test]
    fn empty_export_still_renders() {
        assert!(render_svg(&[], (1.0, 0.0), "x").contains("<line"));
    }
}
