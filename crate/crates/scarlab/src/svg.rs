//! Static line plots of CSV outputs. Output bytes depend only on the input.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::format::Table;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 400.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 30.0;
const BOTTOM: f64 = 50.0;
const TICKS: usize = 5;

fn tick_label(x: f64) -> String {
    let a = x.abs();
    if a == 0.0 || (1e-3..1e4).contains(&a) {
        let s = format!("{x:.4}");
        let s = s.trim_end_matches('0').trim_end_matches('.');
        if s == "-0" {
            "0".into()
        } else {
            s.to_string()
        }
    } else {
        format!("{x:.2e}")
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn range(values: impl Iterator<Item = f64>) -> Option<(f64, f64)> {
    let (lo, hi) =
        values.filter(|v| v.is_finite()).fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if !lo.is_finite() {
        return None;
    }
    if lo == hi {
        let pad = if lo == 0.0 { 1.0 } else { 0.1 * lo.abs() };
        return Some((lo - pad, hi + pad));
    }
    Some((lo, hi))
}

/// Line plot of column `y_col` against column 0.
pub fn render(table: &Table, y_col: usize, title: &str) -> Result<String, String> {
    if table.header.len() < 2 || y_col == 0 || y_col >= table.header.len() {
        return Err("need an x column and a y column".into());
    }
    let pts: Vec<(f64, f64)> =
        table.rows.iter().map(|r| (r[0], r[y_col])).filter(|(x, y)| x.is_finite() && y.is_finite()).collect();
    let (x0, x1) = range(pts.iter().map(|p| p.0)).ok_or("no finite data")?;
    let (y0, y1) = range(pts.iter().map(|p| p.1)).ok_or("no finite data")?;
    let (pw, ph) = (WIDTH - LEFT - RIGHT, HEIGHT - TOP - BOTTOM);
    let px = |x: f64| LEFT + (x - x0) / (x1 - x0) * pw;
    let py = |y: f64| TOP + (1.0 - (y - y0) / (y1 - y0)) * ph;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    let _ = writeln!(s, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="18" font-family="sans-serif" font-size="14" text-anchor="middle">{}</text>"#,
        LEFT + pw / 2.0,
        escape(title)
    );
    let _ = writeln!(s, r#"<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#);
    for i in 0..=TICKS {
        let f = i as f64 / TICKS as f64;
        let (xv, yv) = (x0 + f * (x1 - x0), y0 + f * (y1 - y0));
        let (tx, ty) = (px(xv), py(yv));
        let _ = writeln!(
            s,
            r#"<line x1="{tx:.2}" y1="{:.2}" x2="{tx:.2}" y2="{:.2}" stroke="black"/>"#,
            TOP + ph,
            TOP + ph + 5.0
        );
        let _ = writeln!(
            s,
            r#"<text x="{tx:.2}" y="{:.2}" font-family="sans-serif" font-size="11" text-anchor="middle">{}</text>"#,
            TOP + ph + 18.0,
            tick_label(xv)
        );
        let _ = writeln!(s, r#"<line x1="{:.2}" y1="{ty:.2}" x2="{LEFT}" y2="{ty:.2}" stroke="black"/>"#, LEFT - 5.0);
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" font-family="sans-serif" font-size="11" text-anchor="end">{}</text>"#,
            LEFT - 8.0,
            ty + 4.0,
            tick_label(yv)
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="{:.2}" font-family="sans-serif" font-size="13" text-anchor="middle">{}</text>"#,
        LEFT + pw / 2.0,
        HEIGHT - 8.0,
        escape(&table.header[0])
    );
    let _ = writeln!(
        s,
        r#"<text x="16" y="{:.2}" font-family="sans-serif" font-size="13" text-anchor="middle" transform="rotate(-90 16 {:.2})">{}</text>"#,
        TOP + ph / 2.0,
        TOP + ph / 2.0,
        escape(&table.header[y_col])
    );
    let mut path = String::new();
    for (x, y) in &pts {
        let _ = write!(path, "{:.2},{:.2} ", px(*x), py(*y));
    }
    let _ =
        writeln!(s, r#"<polyline fill="none" stroke="steelblue" stroke-width="1.5" points="{}"/>"#, path.trim_end());
    s.push_str("</svg>\n");
    Ok(s)
}

/// Writes `<csv stem>.svg` next to `csv_path`, plotting the second column.
pub fn emit_svg(csv_path: &Path) -> Result<PathBuf, String> {
    let text = std::fs::read_to_string(csv_path).map_err(|e| format!("{}: {e}", csv_path.display()))?;
    let table = Table::parse(&text).map_err(|e| format!("{}: {e}", csv_path.display()))?;
    let title = csv_path.file_stem().and_then(|s| s.to_str()).unwrap_or("plot");
    let svg = render(&table, 1, title)?;
    let out = csv_path.with_extension("svg");
    std::fs::write(&out, svg).map_err(|e| format!("{}: {e}", out.display()))?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Table {
        let mut t = Table::new(&["k", "im_sigma_tilde"]);
        for i in 0..10 {
            let x = i as f64;
            t.push(vec![x, x * x]);
        }
        t
    }

    #[test]
    fn deterministic_and_labelled() {
        let a = render(&sample(), 1, "selfenergy").unwrap();
        let b = render(&sample(), 1, "selfenergy").unwrap();
        assert_eq!(a, b);
        assert!(a.contains(">k</text>") && a.contains(">im_sigma_tilde</text>"));
        assert!(a.starts_with("<svg") && a.ends_with("</svg>\n"));
    }

    #[test]
    fn rejects_bad_input() {
        let t = Table::new(&["only"]);
        assert!(render(&t, 1, "x").is_err());
        let mut t = Table::new(&["a", "b"]);
        t.push(vec![f64::NAN, f64::NAN]);
        assert!(render(&t, 1, "x").is_err());
    }

    #[test]
    fn constant_series_is_drawable() {
        let mut t = Table::new(&["t", "c"]);
        t.push(vec![0.0, 2.0]);
        t.push(vec![1.0, 2.0]);
        assert!(render(&t, 1, "flat").unwrap().contains("polyline"));
    }
}
