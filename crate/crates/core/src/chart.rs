//! Native SVG emitters for the block-distribution and trade-off charts.
//! Output is deterministic for a fixed input: no timestamps, no randomness,
//! fixed 960x540 canvas.

use std::fmt::Write as _;
use std::io;
use std::path::Path;

use crate::cost::CostReport;
use crate::tradeoff::{PointFamily, TradeoffPoint};

const WIDTH: f64 = 960.0;
const HEIGHT: f64 = 540.0;

const MACS_COLOR: &str = "#4c78a8";
const PARAMS_COLOR: &str = "#f58518";
const PROPOSED_COLOR: &str = "#d62728";
const SCALING_COLOR: &str = "#1f77b4";

fn family_color(family: PointFamily) -> &'static str {
    match family {
        PointFamily::Proposed => PROPOSED_COLOR,
        PointFamily::InputScaling => SCALING_COLOR,
    }
}

fn svg_open(title: &str) -> String {
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" \
         viewBox=\"0 0 {WIDTH} {HEIGHT}\" font-family=\"sans-serif\">\n\
         <rect width=\"{WIDTH}\" height=\"{HEIGHT}\" fill=\"white\"/>\n\
         <text x=\"{:.2}\" y=\"24\" font-size=\"16\" text-anchor=\"middle\">{title}</text>\n",
        WIDTH / 2.0
    )
}

fn text(out: &mut String, x: f64, y: f64, size: u32, anchor: &str, body: &str) {
    let _ = writeln!(
        out,
        "<text x=\"{x:.2}\" y=\"{y:.2}\" font-size=\"{size}\" text-anchor=\"{anchor}\">{body}</text>"
    );
}

fn line(out: &mut String, x1: f64, y1: f64, x2: f64, y2: f64, stroke: &str, width: f64) {
    let _ = writeln!(
        out,
        "<line x1=\"{x1:.2}\" y1=\"{y1:.2}\" x2=\"{x2:.2}\" y2=\"{y2:.2}\" \
         stroke=\"{stroke}\" stroke-width=\"{width}\"/>"
    );
}

// ── Block distribution (grouped bars) ───────────────────────────────────────

/// Grouped bar chart of the per-block MAC and parameter distribution, blocks
/// in report order (Stem, Res2..Res5, FPN, D3..D7) with head branches merged.
pub fn render_distribution_chart(report: &CostReport) -> String {
    let rows = report.display_blocks();

    let left = 80.0;
    let right = WIDTH - 90.0;
    let top = 50.0;
    let bottom = HEIGHT - 70.0;
    let plot_w = right - left;
    let plot_h = bottom - top;

    let max_gmacs = rows
        .iter()
        .map(|r| r.macs as f64 / 1e9)
        .fold(0.0, f64::max)
        .max(1e-9);
    let max_params = rows
        .iter()
        .map(|r| r.params as f64 / 1e6)
        .fold(0.0, f64::max)
        .max(1e-9);

    let mut out = svg_open("MAC and parameter distribution by block");

    // axes
    line(&mut out, left, top, left, bottom, "#333333", 1.0);
    line(&mut out, right, top, right, bottom, "#333333", 1.0);
    line(&mut out, left, bottom, right, bottom, "#333333", 1.0);
    for i in 0..=5 {
        let frac = i as f64 / 5.0;
        let y = bottom - frac * plot_h;
        line(&mut out, left - 4.0, y, left, y, "#333333", 1.0);
        text(&mut out, left - 8.0, y + 4.0, 11, "end", &format!("{:.1}", frac * max_gmacs));
        line(&mut out, right, y, right + 4.0, y, "#333333", 1.0);
        text(&mut out, right + 8.0, y + 4.0, 11, "start", &format!("{:.1}", frac * max_params));
    }
    text(&mut out, left - 50.0, top - 14.0, 12, "start", "GMACs");
    text(&mut out, right - 10.0, top - 14.0, 12, "start", "params (M)");

    let band = plot_w / rows.len().max(1) as f64;
    let bar_w = band * 0.3;
    for (i, row) in rows.iter().enumerate() {
        let x0 = left + i as f64 * band;
        let gmacs = row.macs as f64 / 1e9;
        let params_m = row.params as f64 / 1e6;
        let mac_h = gmacs / max_gmacs * plot_h;
        let par_h = params_m / max_params * plot_h;

        let mac_x = x0 + band * 0.15;
        let par_x = x0 + band * 0.55;
        let _ = writeln!(
            out,
            "<rect x=\"{mac_x:.2}\" y=\"{:.2}\" width=\"{bar_w:.2}\" height=\"{mac_h:.2}\" \
             fill=\"{MACS_COLOR}\" data-kind=\"macs\" data-block=\"{}\" data-value=\"{gmacs}\"/>",
            bottom - mac_h,
            row.label
        );
        let _ = writeln!(
            out,
            "<rect x=\"{par_x:.2}\" y=\"{:.2}\" width=\"{bar_w:.2}\" height=\"{par_h:.2}\" \
             fill=\"{PARAMS_COLOR}\" data-kind=\"params\" data-block=\"{}\" data-value=\"{params_m}\"/>",
            bottom - par_h,
            row.label
        );
        text(&mut out, mac_x + bar_w / 2.0, bottom - mac_h - 4.0, 10, "middle", &format!("{gmacs:.1}"));
        text(&mut out, par_x + bar_w / 2.0, bottom - par_h - 4.0, 10, "middle", &format!("{params_m:.1}"));
        text(&mut out, x0 + band / 2.0, bottom + 18.0, 12, "middle", &row.label);
    }

    // legend
    let lx = left + 10.0;
    let _ = writeln!(
        out,
        "<rect x=\"{lx:.2}\" y=\"{:.2}\" width=\"12\" height=\"12\" fill=\"{MACS_COLOR}\"/>",
        top + 4.0
    );
    text(&mut out, lx + 18.0, top + 14.0, 12, "start", "MACs");
    let _ = writeln!(
        out,
        "<rect x=\"{:.2}\" y=\"{:.2}\" width=\"12\" height=\"12\" fill=\"{PARAMS_COLOR}\"/>",
        lx + 80.0,
        top + 4.0
    );
    text(&mut out, lx + 98.0, top + 14.0, 12, "start", "parameters");

    out.push_str("</svg>\n");
    out
}

pub fn emit_distribution_chart(report: &CostReport, path: &Path) -> io::Result<()> {
    std::fs::write(path, render_distribution_chart(report))
}

// ── Trade-off scatter ───────────────────────────────────────────────────────

/// Scatter of GMACs versus annotated mAP with one polyline per family.
/// Points without an annotation are rendered on a rug strip above the x axis
/// instead of being placed at an invented accuracy.
pub fn render_tradeoff_chart(points: &[TradeoffPoint]) -> String {
    let left = 80.0;
    let right = WIDTH - 40.0;
    let top = 50.0;
    let bottom = HEIGHT - 80.0;
    let plot_w = right - left;
    let plot_h = bottom - top;

    let gmacs: Vec<f64> = points.iter().map(TradeoffPoint::gmacs).collect();
    let (mut x_min, mut x_max) = gmacs
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &g| {
            (lo.min(g), hi.max(g))
        });
    if !x_min.is_finite() {
        x_min = 0.0;
        x_max = 1.0;
    }
    if x_max - x_min < 1e-9 {
        x_min -= 1.0;
        x_max += 1.0;
    }
    let x_pad = (x_max - x_min) * 0.05;
    let (x_lo, x_hi) = (x_min - x_pad, x_max + x_pad);

    let annotated: Vec<f64> = points
        .iter()
        .filter_map(|p| p.map_annotation.as_ref().map(|a| a.value_percent))
        .collect();
    let (y_lo, y_hi) = if annotated.is_empty() {
        (0.0, 1.0)
    } else {
        let lo = annotated.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = annotated.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if hi - lo < 1e-9 { (lo - 0.5, hi + 0.5) } else { (lo - 0.3, hi + 0.3) }
    };

    let sx = |g: f64| left + (g - x_lo) / (x_hi - x_lo) * plot_w;
    let sy = |m: f64| bottom - (m - y_lo) / (y_hi - y_lo) * plot_h;

    let mut out = svg_open("FLOPs and mAP trade-off");

    line(&mut out, left, top, left, bottom, "#333333", 1.0);
    line(&mut out, left, bottom, right, bottom, "#333333", 1.0);
    for i in 0..=6 {
        let g = x_lo + (x_hi - x_lo) * i as f64 / 6.0;
        let x = sx(g);
        line(&mut out, x, bottom, x, bottom + 4.0, "#333333", 1.0);
        text(&mut out, x, bottom + 18.0, 11, "middle", &format!("{g:.0}"));
    }
    for i in 0..=5 {
        let m = y_lo + (y_hi - y_lo) * i as f64 / 5.0;
        let y = sy(m);
        line(&mut out, left - 4.0, y, left, y, "#333333", 1.0);
        text(&mut out, left - 8.0, y + 4.0, 11, "end", &format!("{m:.1}"));
    }
    text(&mut out, left + plot_w / 2.0, HEIGHT - 34.0, 12, "middle", "GMACs");
    text(&mut out, left - 56.0, top - 14.0, 12, "start", "mAP (%)");

    for family in [PointFamily::Proposed, PointFamily::InputScaling] {
        let color = family_color(family);
        let mut with_map: Vec<&TradeoffPoint> = points
            .iter()
            .filter(|p| p.family == family && p.map_annotation.is_some())
            .collect();
        with_map.sort_by(|a, b| a.macs.cmp(&b.macs).then(a.label.cmp(&b.label)));

        if with_map.len() >= 2 {
            let path: Vec<String> = with_map
                .iter()
                .map(|p| {
                    let a = p.map_annotation.as_ref().expect("filtered on annotation");
                    format!("{:.2},{:.2}", sx(p.gmacs()), sy(a.value_percent))
                })
                .collect();
            let _ = writeln!(
                out,
                "<polyline points=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\" \
                 stroke-dasharray=\"5,3\" data-family=\"{}\"/>",
                path.join(" "),
                family.label()
            );
        }
        for p in &with_map {
            let a = p.map_annotation.as_ref().expect("filtered on annotation");
            let (x, y) = (sx(p.gmacs()), sy(a.value_percent));
            let _ = writeln!(
                out,
                "<circle cx=\"{x:.2}\" cy=\"{y:.2}\" r=\"4\" fill=\"{color}\" \
                 data-family=\"{}\" data-label=\"{}\" data-gmacs=\"{}\"/>",
                family.label(),
                p.label,
                p.gmacs()
            );
            text(&mut out, x + 7.0, y - 7.0, 10, "start", &p.label);
        }

        // rug strip for points with no annotation
        for p in points
            .iter()
            .filter(|p| p.family == family && p.map_annotation.is_none())
        {
            let x = sx(p.gmacs());
            let _ = writeln!(
                out,
                "<line class=\"rug\" x1=\"{x:.2}\" y1=\"{:.2}\" x2=\"{x:.2}\" y2=\"{:.2}\" \
                 stroke=\"{color}\" stroke-width=\"1.5\" data-family=\"{}\" data-label=\"{}\" \
                 data-gmacs=\"{}\"/>",
                bottom - 14.0,
                bottom - 2.0,
                family.label(),
                p.label,
                p.gmacs()
            );
        }
    }

    // legend
    let lx = right - 190.0;
    let mut ly = top + 8.0;
    for family in [PointFamily::Proposed, PointFamily::InputScaling] {
        line(&mut out, lx, ly, lx + 24.0, ly, family_color(family), 2.0);
        text(&mut out, lx + 30.0, ly + 4.0, 12, "start", family.label());
        ly += 18.0;
    }
    text(&mut out, lx, ly + 4.0, 10, "start", "ticks: points without published mAP");

    out.push_str("</svg>\n");
    out
}

pub fn emit_tradeoff_chart(points: &[TradeoffPoint], path: &Path) -> io::Result<()> {
    std::fs::write(path, render_tradeoff_chart(points))
}
