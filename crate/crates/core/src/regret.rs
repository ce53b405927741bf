//! Plugin regret estimators: the closed-form calibration part, the bounded
//! grouping part, and the advisory verdict built from them.
//!
//! Per score bin with calibration estimate `c` and grouping-loss estimate
//! `g` at threshold `t*` and scale `UΔ`:
//!
//! * calibration regret: `UΔ·|c - t*|` where the bin's decision disagrees
//!   with the recalibrated one, zero elsewhere;
//! * grouping regret lower bound: `UΔ·[g - V_min]+`, with `V_min` the
//!   largest variance still compatible with zero regret;
//! * grouping regret upper bound: `(UΔ/2)(√(g + (c - t*)²) - |c - t*|)`;
//! * grouping regret point estimate: the midpoint of the two bounds.

use alloc::vec::Vec;
use serde::Serialize;
use thiserror::Error;

use crate::binning::CalibrationCurve;
use crate::dataset::ScoredDataset;
use crate::decision::UtilityMatrix;
use crate::grouping::GroupingLossEstimate;
use crate::math;

#[derive(Debug, Error, PartialEq)]
pub enum RegretError {
    #[error("calibration curve and grouping estimate use different binnings")]
    BinningMismatch,
    #[error("dataset is empty")]
    EmptyDataset,
}

/// Largest within-bin variance compatible with zero grouping regret:
/// `(1-c)(c-t*)` when `c >= t*`, else `c(t*-c)`.
pub fn v_min(c: f64, t_star: f64) -> f64 {
    if c >= t_star {
        (1.0 - c) * (c - t_star)
    } else {
        c * (t_star - c)
    }
}

/// Variance cap for a `[0, 1]`-valued mean: `c(1-c)`.
pub fn v_max(c: f64) -> f64 {
    c * (1.0 - c)
}

/// Calibration regret of a bin whose samples decide `score_decision`:
/// `UΔ·|c - t*|` if that disagrees with `1{c >= t*}`, else 0.
pub fn rcl_bin(c_hat: f64, score_decision: bool, t_star: f64, u_delta: f64) -> f64 {
    if (c_hat >= t_star) != score_decision {
        u_delta * (c_hat - t_star).abs()
    } else {
        0.0
    }
}

/// Lower bound on the grouping regret of a bin.
pub fn lgl_bin(c_hat: f64, gl_hat: f64, t_star: f64, u_delta: f64) -> f64 {
    u_delta * (gl_hat - v_min(c_hat, t_star)).max(0.0)
}

/// Upper bound on the grouping regret of a bin.
pub fn ugl_bin(c_hat: f64, gl_hat: f64, t_star: f64, u_delta: f64) -> f64 {
    let a = (c_hat - t_star).abs();
    0.5 * u_delta * (math::sqrt(gl_hat + a * a) - a)
}

/// Midpoint of the grouping-regret bounds.
pub fn rgl_bin(c_hat: f64, gl_hat: f64, t_star: f64, u_delta: f64) -> f64 {
    0.5 * (lgl_bin(c_hat, gl_hat, t_star, u_delta) + ugl_bin(c_hat, gl_hat, t_star, u_delta))
}

/// Per-bin regret estimates. `mass_fraction` weights the bin in aggregates.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BinRegret {
    pub lo: f64,
    pub hi: f64,
    pub mass: usize,
    pub mass_fraction: f64,
    pub mean_score: f64,
    pub c_hat: f64,
    pub gl_hat: f64,
    /// True when the grouping estimate was unavailable for this bin and 0
    /// was substituted.
    pub gl_missing: bool,
    pub v_min: f64,
    pub v_max: f64,
    pub rcl_hat: f64,
    pub lgl_hat: f64,
    pub ugl_hat: f64,
    pub rgl_hat: f64,
    pub r_hat: f64,
}

/// Regret estimates per bin plus mass-weighted aggregates, with the
/// configuration echoed.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegretReport {
    pub t_star: f64,
    pub u_delta: f64,
    /// Decision threshold of the rule under evaluation.
    pub threshold: f64,
    pub n: usize,
    pub bins: Vec<BinRegret>,
    pub rcl_hat: f64,
    pub rgl_hat: f64,
    pub r_hat: f64,
}

/// Assemble the per-bin and aggregate regret estimates for the rule
/// `1{score >= threshold}` evaluated on `ds_eval`.
///
/// The calibration part averages each sample's own disagreement indicator
/// rather than using one representative score per bin, since a bin may
/// straddle the decision threshold. Bins without a grouping estimate
/// contribute zero grouping regret and are flagged.
pub fn regret_report(
    ds_eval: &ScoredDataset,
    gl: &GroupingLossEstimate,
    curve: &CalibrationCurve,
    u: &UtilityMatrix,
    threshold: f64,
) -> Result<RegretReport, RegretError> {
    if curve.edges() != gl.edges() {
        return Err(RegretError::BinningMismatch);
    }
    if ds_eval.is_empty() {
        return Err(RegretError::EmptyDataset);
    }
    let t_star = u.t_star();
    let u_delta = u.u_delta();
    let n_bins = curve.bins().len();

    // Count per-bin disagreements between each sample's decision and the
    // recalibrated decision 1{c_hat >= t*}.
    let mut eval_mass = alloc::vec![0usize; n_bins];
    let mut disagree = alloc::vec![0usize; n_bins];
    let edges = curve.edges();
    for s in ds_eval.samples() {
        let mut i = 0;
        while i + 2 < edges.len() && s.score >= edges[i + 1] {
            i += 1;
        }
        eval_mass[i] += 1;
        if let Some(c_hat) = curve.bins()[i].mean_label() {
            if (c_hat >= t_star) != (s.score >= threshold) {
                disagree[i] += 1;
            }
        }
    }

    let n = ds_eval.len();
    let mut bins = Vec::with_capacity(n_bins);
    let mut agg_rcl = 0.0;
    let mut agg_rgl = 0.0;
    for i in 0..n_bins {
        let cb = &curve.bins()[i];
        let (Some(c_hat), Some(mean_score)) = (cb.mean_label(), cb.mean_score) else {
            continue; // no eval mass, nothing to estimate
        };
        let mass = eval_mass[i];
        if mass == 0 {
            continue;
        }
        let mass_fraction = mass as f64 / n as f64;
        let (gl_hat, gl_missing) = match gl.bins()[i].gl_hat {
            Some(g) => (g, false),
            None => (0.0, true),
        };
        let rcl_hat =
            u_delta * (c_hat - t_star).abs() * (disagree[i] as f64 / mass as f64);
        let lgl_hat = lgl_bin(c_hat, gl_hat, t_star, u_delta);
        let ugl_hat = ugl_bin(c_hat, gl_hat, t_star, u_delta);
        let rgl_hat = 0.5 * (lgl_hat + ugl_hat);
        let r_hat = rcl_hat + rgl_hat;
        agg_rcl += mass_fraction * rcl_hat;
        agg_rgl += mass_fraction * rgl_hat;
        bins.push(BinRegret {
            lo: cb.lo,
            hi: cb.hi,
            mass,
            mass_fraction,
            mean_score,
            c_hat,
            gl_hat,
            gl_missing,
            v_min: v_min(c_hat, t_star),
            v_max: v_max(c_hat),
            rcl_hat,
            lgl_hat,
            ugl_hat,
            rgl_hat,
            r_hat,
        });
    }

    Ok(RegretReport {
        t_star,
        u_delta,
        threshold,
        n,
        bins,
        rcl_hat: agg_rcl,
        rgl_hat: agg_rgl,
        r_hat: agg_rcl + agg_rgl,
    })
}

/// Per-bin check that the calibration estimate matches the mean score, i.e.
/// that the bin would carry zero calibration regret for every utility
/// matrix. `None` for empty bins.
pub fn zero_rcl_all_t_check(curve: &CalibrationCurve, tol: f64) -> Vec<Option<bool>> {
    curve
        .bins()
        .iter()
        .map(|b| {
            let (c, p) = (b.mean_label()?, b.mean_score?);
            Some((c - p).abs() <= tol)
        })
        .collect()
}

/// Recommended follow-up given the estimated regret decomposition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    NotSuboptimal,
    Recalibrate,
    AdvancedPostTraining,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Advice {
    pub verdict: Verdict,
    pub r_hat: f64,
    pub rcl_hat: f64,
    pub rgl_hat: f64,
    pub gate: f64,
}

/// Decision rule over the aggregate estimates: regret below the gate needs
/// nothing; regret dominated by the calibration part needs recalibration
/// only; a grouping part above the gate calls for post-training on
/// features.
pub fn advise(report: &RegretReport, gate: f64) -> Advice {
    let verdict = if report.r_hat <= gate {
        Verdict::NotSuboptimal
    } else if report.rgl_hat <= gate {
        Verdict::Recalibrate
    } else {
        Verdict::AdvancedPostTraining
    };
    Advice {
        verdict,
        r_hat: report.r_hat,
        rcl_hat: report.rcl_hat,
        rgl_hat: report.rgl_hat,
        gate,
    }
}
