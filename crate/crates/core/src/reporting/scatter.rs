use std::fmt::Write as _;
use std::path::Path;

use crate::evaluation::ols;
use crate::{Error, Result};

const PALETTE: [&str; 6] = ["#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b"];
const SIZE: f64 = 480.0;
const MARGIN: f64 = 48.0;

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub name: String,
    /// `(reference rank, measure rank)`.
    pub points: Vec<(f64, f64)>,
}

/// Rank-versus-rank scatter; both axes span `1..=n`.
#[derive(Debug, Clone, PartialEq)]
pub struct RankScatter {
    pub series: Vec<Series>,
    pub n: usize,
}

fn esc(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

pub fn scatter_svg(data: &RankScatter) -> Result<String> {
    if data.series.is_empty() {
        return Err(Error::Parameter("scatter plot has no series".into()));
    }
    if let Some(s) = data.series.iter().find(|s| s.points.len() < 2) {
        return Err(Error::Parameter(format!("series `{}` has fewer than 2 points", s.name)));
    }
    let n = data.n.max(2) as f64;
    let span = SIZE - 2.0 * MARGIN;
    let px = |r: f64| MARGIN + (r - 1.0) / (n - 1.0) * span;
    let py = |r: f64| SIZE - MARGIN - (r - 1.0) / (n - 1.0) * span;

    let mut svg = String::new();
    writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{SIZE}" height="{SIZE}" viewBox="0 0 {SIZE} {SIZE}">"#
    )
    .unwrap();
    for (s, color) in data.series.iter().zip(PALETTE.iter().cycle()) {
        let (slope, intercept) = ols(&s.points)?;
        writeln!(
            svg,
            "<!-- series=\"{}\" n={} slope={slope:.6} intercept={intercept:.6} color={color} -->",
            esc(&s.name),
            s.points.len()
        )
        .unwrap();
    }
    writeln!(svg, r##"<rect width="{SIZE}" height="{SIZE}" fill="#ffffff"/>"##).unwrap();
    writeln!(
        svg,
        r##"<path d="M{m} {b} H{e} M{m} {b} V{m}" stroke="#000000" fill="none"/>"##,
        m = MARGIN,
        b = SIZE - MARGIN,
        e = SIZE - MARGIN
    )
    .unwrap();
    writeln!(
        svg,
        r#"<text x="{}" y="{}" font-family="monospace" font-size="12" text-anchor="middle">reference rank (1..{})</text>"#,
        SIZE / 2.0,
        SIZE - 12.0,
        data.n
    )
    .unwrap();
    writeln!(
        svg,
        r#"<text x="14" y="{}" font-family="monospace" font-size="12" text-anchor="middle" transform="rotate(-90 14 {})">measure rank</text>"#,
        SIZE / 2.0,
        SIZE / 2.0
    )
    .unwrap();
    for (i, (s, color)) in data.series.iter().zip(PALETTE.iter().cycle()).enumerate() {
        let (slope, intercept) = ols(&s.points)?;
        writeln!(svg, r#"<g class="series" data-name="{}">"#, esc(&s.name)).unwrap();
        for &(x, y) in &s.points {
            writeln!(svg, r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="{color}"/>"#, px(x), py(y)).unwrap();
        }
        writeln!(
            svg,
            r#"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="{color}" stroke-width="1.5"/>"#,
            px(1.0),
            py(slope + intercept),
            px(n),
            py(slope * n + intercept)
        )
        .unwrap();
        let ly = MARGIN + 16.0 * i as f64;
        writeln!(
            svg,
            r#"<text x="{:.2}" y="{ly:.2}" font-family="monospace" font-size="12" fill="{color}">{}</text>"#,
            MARGIN + 8.0,
            esc(&s.name)
        )
        .unwrap();
        svg.push_str("</g>\n");
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}

pub fn render_scatter(data: &RankScatter, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let svg = scatter_svg(data)?;
    std::fs::write(path, svg).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn diagonal(n: usize) -> Series {
        Series {
            name: "fft".into(),
            points: (1..=n).map(|i| (i as f64, i as f64)).collect(),
        }
    }

    #[test]
    fn identity_series_has_unit_slope_comment() {
        let svg = scatter_svg(&RankScatter {
            series: vec![diagonal(30)],
            n: 30,
        })
        .unwrap();
        assert!(svg.contains("slope=1.000000 intercept=0.000000"), "{svg}");
        assert_eq!(svg.matches("<circle").count(), 30);
    }

    #[test]
    fn empty_is_error() {
        assert!(scatter_svg(&RankScatter { series: vec![], n: 0 }).is_err());
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.svg");
        assert!(render_scatter(&RankScatter { series: vec![], n: 0 }, &path).is_err());
        assert!(!path.exists());
    }
}
