//! Artifact formatting: fixed-precision floats, atomic file writes, and
//! small SVG renderings of density curves and boxplots.

use std::path::Path;

use crate::density::{BoxplotSummary, DensityCurve};
use crate::error::Result;

/// Format a float at 17 significant digits, enough to round-trip any f64.
pub fn fmt_f64(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        format!("{x}")
    }
}

/// Write a file atomically: contents land in a sibling temp file first and
/// are renamed into place, so readers never observe a partial artifact.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    std::fs::create_dir_all(dir)?;
    let file_name = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| "artifact".into());
    let tmp = dir.join(format!(".{file_name}.tmp"));
    std::fs::write(&tmp, bytes)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

const SVG_WIDTH: f64 = 800.0;
const SVG_HEIGHT: f64 = 480.0;
const SVG_MARGIN: f64 = 50.0;
const SVG_COLORS: [&str; 4] = ["#1b6ca8", "#c0392b", "#27ae60", "#8e44ad"];

fn svg_header(title: &str) -> String {
    format!(
        concat!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" ",
            "viewBox=\"0 0 {w} {h}\">\n",
            "<rect width=\"{w}\" height=\"{h}\" fill=\"white\"/>\n",
            "<text x=\"{tx}\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" ",
            "font-size=\"16\">{title}</text>\n"
        ),
        w = SVG_WIDTH,
        h = SVG_HEIGHT,
        tx = SVG_WIDTH / 2.0,
        title = title,
    )
}

struct Frame {
    x_lo: f64,
    x_hi: f64,
    y_lo: f64,
    y_hi: f64,
}

impl Frame {
    fn x(&self, v: f64) -> f64 {
        SVG_MARGIN + (v - self.x_lo) / (self.x_hi - self.x_lo) * (SVG_WIDTH - 2.0 * SVG_MARGIN)
    }

    fn y(&self, v: f64) -> f64 {
        SVG_HEIGHT - SVG_MARGIN
            - (v - self.y_lo) / (self.y_hi - self.y_lo) * (SVG_HEIGHT - 2.0 * SVG_MARGIN)
    }

    fn axes(&self) -> String {
        format!(
            concat!(
                "<line x1=\"{m}\" y1=\"{b}\" x2=\"{r}\" y2=\"{b}\" stroke=\"black\"/>\n",
                "<line x1=\"{m}\" y1=\"{t}\" x2=\"{m}\" y2=\"{b}\" stroke=\"black\"/>\n",
                "<text x=\"{m}\" y=\"{lb}\" font-family=\"sans-serif\" font-size=\"11\">{xlo:.3}</text>\n",
                "<text x=\"{r}\" y=\"{lb}\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">{xhi:.3}</text>\n"
            ),
            m = SVG_MARGIN,
            t = SVG_MARGIN,
            b = SVG_HEIGHT - SVG_MARGIN,
            r = SVG_WIDTH - SVG_MARGIN,
            lb = SVG_HEIGHT - SVG_MARGIN + 16.0,
            xlo = self.x_lo,
            xhi = self.x_hi,
        )
    }
}

/// Render labeled density curves as a single SVG document.
pub fn density_svg(curves: &[(String, DensityCurve)], title: &str) -> String {
    let x_lo = curves
        .iter()
        .flat_map(|(_, c)| c.grid.first().copied())
        .fold(f64::INFINITY, f64::min);
    let x_hi = curves
        .iter()
        .flat_map(|(_, c)| c.grid.last().copied())
        .fold(f64::NEG_INFINITY, f64::max);
    let y_hi = curves
        .iter()
        .flat_map(|(_, c)| c.density.iter().copied())
        .fold(0.0f64, f64::max);
    let frame = Frame {
        x_lo,
        x_hi,
        y_lo: 0.0,
        y_hi: y_hi.max(1e-12),
    };

    let mut svg = svg_header(title);
    svg.push_str(&frame.axes());
    for (i, (label, curve)) in curves.iter().enumerate() {
        let color = SVG_COLORS[i % SVG_COLORS.len()];
        let points: Vec<String> = curve
            .grid
            .iter()
            .zip(&curve.density)
            .map(|(&g, &d)| format!("{:.2},{:.2}", frame.x(g), frame.y(d)))
            .collect();
        svg.push_str(&format!(
            "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\" points=\"{}\"/>\n",
            points.join(" ")
        ));
        svg.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" fill=\"{color}\" font-family=\"sans-serif\" font-size=\"13\">{label}</text>\n",
            SVG_WIDTH - SVG_MARGIN - 120.0,
            SVG_MARGIN + 18.0 * (i + 1) as f64,
        ));
    }
    svg.push_str("</svg>\n");
    svg
}

/// Render labeled boxplots side by side as a single SVG document.
pub fn boxplot_svg(rows: &[(String, BoxplotSummary)], title: &str) -> String {
    let y_lo = rows.iter().map(|(_, b)| b.min).fold(f64::INFINITY, f64::min);
    let y_hi = rows
        .iter()
        .map(|(_, b)| b.max)
        .fold(f64::NEG_INFINITY, f64::max);
    let pad = ((y_hi - y_lo) * 0.05).max(1e-12);
    let frame = Frame {
        x_lo: 0.0,
        x_hi: rows.len() as f64,
        y_lo: y_lo - pad,
        y_hi: y_hi + pad,
    };

    let mut svg = svg_header(title);
    svg.push_str(&frame.axes());
    for (i, (label, b)) in rows.iter().enumerate() {
        let center = frame.x(i as f64 + 0.5);
        let half = (SVG_WIDTH - 2.0 * SVG_MARGIN) / rows.len() as f64 * 0.25;
        let color = SVG_COLORS[i % SVG_COLORS.len()];
        let (yq1, yq3) = (frame.y(b.q1), frame.y(b.q3));
        svg.push_str(&format!(
            "<rect x=\"{:.2}\" y=\"{:.2}\" width=\"{:.2}\" height=\"{:.2}\" fill=\"none\" stroke=\"{color}\"/>\n",
            center - half,
            yq3,
            2.0 * half,
            (yq1 - yq3).abs().max(0.5),
        ));
        for (value, weight) in [(b.median, 2.0), (b.lower_whisker, 1.0), (b.upper_whisker, 1.0)] {
            let y = frame.y(value);
            svg.push_str(&format!(
                "<line x1=\"{:.2}\" y1=\"{y:.2}\" x2=\"{:.2}\" y2=\"{y:.2}\" stroke=\"{color}\" stroke-width=\"{weight}\"/>\n",
                center - half,
                center + half,
            ));
        }
        for whisker in [b.lower_whisker, b.upper_whisker] {
            svg.push_str(&format!(
                "<line x1=\"{center:.2}\" y1=\"{:.2}\" x2=\"{center:.2}\" y2=\"{:.2}\" stroke=\"{color}\"/>\n",
                frame.y(whisker),
                frame.y(if whisker <= b.q1 { b.q1 } else { b.q3 }),
            ));
        }
        for &outlier in &b.outliers {
            svg.push_str(&format!(
                "<circle cx=\"{center:.2}\" cy=\"{:.2}\" r=\"2\" fill=\"{color}\"/>\n",
                frame.y(outlier),
            ));
        }
        svg.push_str(&format!(
            "<text x=\"{center:.2}\" y=\"{}\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\">{label}</text>\n",
            SVG_HEIGHT - SVG_MARGIN + 32.0,
        ));
    }
    svg.push_str("</svg>\n");
    svg
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fmt_round_trips_f64() {
        for x in [0.5, -3.0, 1.0 / 3.0, 2.2250738585072014e-308, 1.7e308] {
            let parsed: f64 = fmt_f64(x).parse().unwrap();
            assert_eq!(parsed, x);
        }
        assert_eq!(fmt_f64(f64::INFINITY), "inf");
        assert_eq!(fmt_f64(f64::NEG_INFINITY), "-inf");
    }

    #[test]
    fn atomic_write_replaces_content() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("out.csv");
        write_atomic(&path, b"first").unwrap();
        write_atomic(&path, b"second").unwrap();
        assert_eq!(std::fs::read(&path).unwrap(), b"second");
        // No temp droppings left behind.
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
    }
}
