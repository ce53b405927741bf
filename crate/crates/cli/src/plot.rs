//! Static SVG diagnostics, written without a plotting dependency: a
//! reliability diagram with the decision thresholds marked, and per-bin
//! grouping-regret bands for each threshold.

use std::fmt::Write;

use regretcal_core::binning::CalibrationCurve;

use crate::pipeline::DecisionResult;

const WIDTH: f64 = 520.0;
const PANEL: f64 = 300.0;
const MARGIN: f64 = 50.0;

fn xy(x01: f64, y01: f64, y_offset: f64) -> (f64, f64) {
    (
        MARGIN + x01 * (WIDTH - 2.0 * MARGIN),
        y_offset + PANEL - MARGIN - y01 * (PANEL - 2.0 * MARGIN),
    )
}

fn axes(svg: &mut String, y_offset: f64, title: &str) {
    let (x0, y0) = xy(0.0, 0.0, y_offset);
    let (x1, y1) = xy(1.0, 1.0, y_offset);
    let _ = write!(
        svg,
        "<rect x='{x0:.1}' y='{y1:.1}' width='{:.1}' height='{:.1}' fill='none' stroke='#444'/>",
        x1 - x0,
        y0 - y1
    );
    let _ = write!(
        svg,
        "<text x='{x0:.1}' y='{:.1}' font-size='13' fill='#222'>{title}</text>",
        y1 - 8.0
    );
    for k in 0..=4 {
        let v = k as f64 / 4.0;
        let (tx, ty) = xy(v, 0.0, y_offset);
        let _ = write!(
            svg,
            "<text x='{tx:.1}' y='{:.1}' font-size='10' fill='#666' text-anchor='middle'>{v:.2}</text>",
            ty + 14.0
        );
        let (lx, ly) = xy(0.0, v, y_offset);
        let _ = write!(
            svg,
            "<text x='{:.1}' y='{ly:.1}' font-size='10' fill='#666' text-anchor='end'>{v:.2}</text>",
            lx - 4.0
        );
    }
}

/// Calibration curve (mean label vs mean score per bin) with the diagonal
/// and one vertical line per decision threshold.
pub fn reliability_svg(curve: &CalibrationCurve, t_stars: &[f64]) -> String {
    let mut svg = String::new();
    let _ = write!(
        svg,
        "<svg xmlns='http://www.w3.org/2000/svg' width='{WIDTH}' height='{PANEL}' viewBox='0 0 {WIDTH} {PANEL}'>"
    );
    axes(&mut svg, 0.0, "reliability diagram");
    let (dx0, dy0) = xy(0.0, 0.0, 0.0);
    let (dx1, dy1) = xy(1.0, 1.0, 0.0);
    let _ = write!(
        svg,
        "<line x1='{dx0:.1}' y1='{dy0:.1}' x2='{dx1:.1}' y2='{dy1:.1}' stroke='#bbb' stroke-dasharray='4 3'/>"
    );
    for &t in t_stars {
        let (tx, ty_top) = xy(t, 1.0, 0.0);
        let (_, ty_bot) = xy(t, 0.0, 0.0);
        let _ = write!(
            svg,
            "<line x1='{tx:.1}' y1='{ty_top:.1}' x2='{tx:.1}' y2='{ty_bot:.1}' stroke='#d88' stroke-width='0.8'/>"
        );
    }
    let mut path = String::new();
    let n = curve.n() as f64;
    for bin in curve.bins() {
        let (Some(p), Some(c)) = (bin.mean_score, bin.mean_label()) else {
            continue;
        };
        let (px, py) = xy(p, c, 0.0);
        let radius = 2.0 + 8.0 * (bin.mass as f64 / n);
        let _ = write!(
            svg,
            "<circle cx='{px:.1}' cy='{py:.1}' r='{radius:.1}' fill='#36c' fill-opacity='0.7'/>"
        );
        if path.is_empty() {
            let _ = write!(path, "M {px:.1} {py:.1}");
        } else {
            let _ = write!(path, " L {px:.1} {py:.1}");
        }
    }
    let _ = write!(svg, "<path d='{path}' fill='none' stroke='#36c'/>");
    svg.push_str("</svg>");
    svg
}

/// One panel per decision problem: per-bin grouping-regret bands
/// `[lower, upper]`, the midpoint estimate, and the calibration regret.
pub fn regret_svg(results: &[DecisionResult]) -> String {
    let height = PANEL * results.len() as f64;
    let mut svg = String::new();
    let _ = write!(
        svg,
        "<svg xmlns='http://www.w3.org/2000/svg' width='{WIDTH}' height='{height}' viewBox='0 0 {WIDTH} {height}'>"
    );
    for (panel, result) in results.iter().enumerate() {
        let y_offset = panel as f64 * PANEL;
        let ceiling = result
            .regret
            .bins
            .iter()
            .map(|b| b.ugl_hat.max(b.rcl_hat))
            .fold(1e-6, f64::max)
            * 1.15;
        axes(
            &mut svg,
            y_offset,
            &format!(
                "regret bands at t*={} (scale {ceiling:.4})",
                result.t_star
            ),
        );
        for bin in &result.regret.bins {
            let x = (bin.lo + bin.hi) / 2.0;
            let (bx, by_lo) = xy(x, bin.lgl_hat / ceiling, y_offset);
            let (_, by_hi) = xy(x, bin.ugl_hat / ceiling, y_offset);
            let (_, by_mid) = xy(x, bin.rgl_hat / ceiling, y_offset);
            let (_, by_rcl) = xy(x, bin.rcl_hat / ceiling, y_offset);
            let _ = write!(
                svg,
                "<line x1='{bx:.1}' y1='{by_lo:.1}' x2='{bx:.1}' y2='{by_hi:.1}' stroke='#2a2' stroke-width='6' stroke-opacity='0.45'/>"
            );
            let _ = write!(
                svg,
                "<line x1='{:.1}' y1='{by_mid:.1}' x2='{:.1}' y2='{by_mid:.1}' stroke='#060' stroke-width='2'/>",
                bx - 5.0,
                bx + 5.0
            );
            let _ = write!(
                svg,
                "<circle cx='{bx:.1}' cy='{by_rcl:.1}' r='2.5' fill='#c33'/>"
            );
        }
    }
    svg.push_str("</svg>");
    svg
}
