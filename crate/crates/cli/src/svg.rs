//! Minimal SVG line chart for measurement trends; no dependencies.

use std::path::Path;

use soluscan_orchestrator::SeriesEntry;

const W: f64 = 720.0;
const H: f64 = 420.0;
const MARGIN: f64 = 50.0;

/// Writes the superposition-ratio and particle-count trends of a series as
/// two polylines (count normalized to its maximum).
pub fn write_trend_svg(entries: &[SeriesEntry], path: &Path) -> std::io::Result<()> {
    let points: Vec<(usize, f64, f64)> = entries
        .iter()
        .filter_map(|e| {
            e.outcome.as_ref().ok().map(|r| {
                (
                    e.index,
                    r.features.superposition_ratio,
                    r.features.particle_pixel_count,
                )
            })
        })
        .collect();
    let max_count = points
        .iter()
        .map(|p| p.2)
        .fold(1.0f64, f64::max);
    let n = entries.len().max(2) as f64;
    let x_of = |i: usize| MARGIN + (W - 2.0 * MARGIN) * i as f64 / (n - 1.0);
    let y_of = |v: f64| H - MARGIN - (H - 2.0 * MARGIN) * v.clamp(0.0, 1.0);
    let polyline = |vals: &[(usize, f64)], color: &str| -> String {
        let pts: Vec<String> = vals
            .iter()
            .map(|&(i, v)| format!("{:.1},{:.1}", x_of(i), y_of(v)))
            .collect();
        format!(
            "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"2\" points=\"{}\"/>",
            pts.join(" ")
        )
    };
    let ratio_pts: Vec<(usize, f64)> = points.iter().map(|&(i, r, _)| (i, r)).collect();
    let count_pts: Vec<(usize, f64)> = points
        .iter()
        .map(|&(i, _, c)| (i, c / max_count))
        .collect();
    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" viewBox=\"0 0 {W} {H}\">\n"
    ));
    svg.push_str("<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");
    svg.push_str(&format!(
        "<line x1=\"{m}\" y1=\"{b}\" x2=\"{r}\" y2=\"{b}\" stroke=\"black\"/>\n<line x1=\"{m}\" y1=\"{t}\" x2=\"{m}\" y2=\"{b}\" stroke=\"black\"/>\n",
        m = MARGIN,
        b = H - MARGIN,
        r = W - MARGIN,
        t = MARGIN
    ));
    svg.push_str(&polyline(&ratio_pts, "#1f77b4"));
    svg.push('\n');
    svg.push_str(&polyline(&count_pts, "#d62728"));
    svg.push('\n');
    svg.push_str(&format!(
        "<text x=\"{}\" y=\"{}\" font-size=\"13\" fill=\"#1f77b4\">superposition ratio</text>\n",
        MARGIN + 6.0,
        MARGIN + 16.0
    ));
    svg.push_str(&format!(
        "<text x=\"{}\" y=\"{}\" font-size=\"13\" fill=\"#d62728\">particle pixels (normalized)</text>\n",
        MARGIN + 6.0,
        MARGIN + 34.0
    ));
    svg.push_str("</svg>\n");
    std::fs::write(path, svg)
}
