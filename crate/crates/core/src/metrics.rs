//! Baseline performance metrics: Brier score, binned calibration errors,
//! AUC, accuracy, and a Pearson correlation helper for sweep studies.

use alloc::vec::Vec;
use serde::Serialize;
use thiserror::Error;

use crate::binning::{estimate_calibration_curve, EqualMassBinning};
use crate::dataset::ScoredDataset;
use crate::math;

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("metric requires both classes present")]
    SingleClass,
}

/// Mean squared distance between scores and outcomes.
pub fn brier(ds: &ScoredDataset) -> Result<f64, MetricsError> {
    if ds.is_empty() {
        return Err(MetricsError::EmptyDataset);
    }
    let total: f64 = ds
        .samples()
        .iter()
        .map(|s| {
            let d = s.score - s.label_value();
            d * d
        })
        .sum();
    Ok(total / ds.len() as f64)
}

/// Binned calibration errors sharing one binning protocol.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CalibrationMetrics {
    /// Mass-weighted mean absolute gap between mean label and mean score.
    pub ece: f64,
    /// Largest per-bin gap.
    pub mce: f64,
    /// Mass-weighted mean squared gap.
    pub cl: f64,
    /// `sqrt(cl)`.
    pub rmsce: f64,
}

pub fn binned_calibration_metrics(
    ds: &ScoredDataset,
    b: &EqualMassBinning,
) -> Result<CalibrationMetrics, MetricsError> {
    let curve = estimate_calibration_curve(ds, b).map_err(|_| MetricsError::EmptyDataset)?;
    let n = ds.len() as f64;
    let mut ece = 0.0;
    let mut mce = 0.0f64;
    let mut cl = 0.0;
    for bin in curve.bins() {
        let (Some(c), Some(p)) = (bin.mean_label(), bin.mean_score) else {
            continue;
        };
        let gap = (c - p).abs();
        let weight = bin.mass as f64 / n;
        ece += weight * gap;
        mce = mce.max(gap);
        cl += weight * gap * gap;
    }
    Ok(CalibrationMetrics {
        ece,
        mce,
        cl,
        rmsce: math::sqrt(cl),
    })
}

/// Mann-Whitney rank statistic with midrank tie handling: the probability
/// that a random positive outranks a random negative, ties counting half.
pub fn auc(ds: &ScoredDataset) -> Result<f64, MetricsError> {
    if ds.is_empty() {
        return Err(MetricsError::EmptyDataset);
    }
    let n_pos = ds.positive_count();
    let n_neg = ds.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(MetricsError::SingleClass);
    }
    let mut order: Vec<usize> = (0..ds.len()).collect();
    order.sort_by(|&a, &b| ds.samples()[a].score.total_cmp(&ds.samples()[b].score));
    // Midranks over tie blocks, 1-based.
    let mut rank_sum_pos = 0.0;
    let mut start = 0;
    while start < order.len() {
        let mut end = start;
        let score = ds.samples()[order[start]].score;
        while end < order.len() && ds.samples()[order[end]].score == score {
            end += 1;
        }
        let midrank = (start + 1 + end) as f64 / 2.0;
        for &i in &order[start..end] {
            if ds.samples()[i].label {
                rank_sum_pos += midrank;
            }
        }
        start = end;
    }
    let n_pos = n_pos as f64;
    Ok((rank_sum_pos - n_pos * (n_pos + 1.0) / 2.0) / (n_pos * n_neg as f64))
}

/// Fraction of samples whose thresholded decision matches the label.
pub fn accuracy(ds: &ScoredDataset, threshold: f64) -> Result<f64, MetricsError> {
    if ds.is_empty() {
        return Err(MetricsError::EmptyDataset);
    }
    let hits = ds
        .samples()
        .iter()
        .filter(|s| (s.score >= threshold) == s.label)
        .count();
    Ok(hits as f64 / ds.len() as f64)
}

/// All baseline metrics at one decision threshold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MetricsReport {
    pub brier: f64,
    pub ece: f64,
    pub mce: f64,
    pub cl: f64,
    pub rmsce: f64,
    pub auc: f64,
    pub accuracy: f64,
}

pub fn metrics_report(
    ds: &ScoredDataset,
    b: &EqualMassBinning,
    threshold: f64,
) -> Result<MetricsReport, MetricsError> {
    let cal = binned_calibration_metrics(ds, b)?;
    Ok(MetricsReport {
        brier: brier(ds)?,
        ece: cal.ece,
        mce: cal.mce,
        cl: cal.cl,
        rmsce: cal.rmsce,
        auc: auc(ds)?,
        accuracy: accuracy(ds, threshold)?,
    })
}

/// Squared Pearson correlation; `None` when either side has no variance.
pub fn pearson_r2(x: &[f64], y: &[f64]) -> Option<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return None;
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    let mut sxy = 0.0;
    for (&a, &b) in x.iter().zip(y) {
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
        sxy += (a - mx) * (b - my);
    }
    if sxx <= 0.0 || syy <= 0.0 {
        return None;
    }
    Some(sxy * sxy / (sxx * syy))
}
