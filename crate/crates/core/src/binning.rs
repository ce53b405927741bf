//! Equal-mass score binning and calibration-curve estimation.
//!
//! Bins are quantile-based rather than equal-width so the score extremes do
//! not starve. Tied scores are kept atomic: a cut that would land inside a
//! tie block slides to the block boundary, and bins emptied by that slide
//! are merged away. Membership uses half-open intervals `[lo, hi)` with the
//! last bin closed, so the bins cover `[0, 1]` exhaustively and exclusively.

use alloc::vec::Vec;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::ScoredDataset;

#[derive(Debug, Error, PartialEq)]
pub enum BinningError {
    #[error("no scores to bin")]
    EmptyInput,
    #[error("number of bins must be positive")]
    NonPositiveBins,
    #[error("dataset is empty")]
    EmptyDataset,
}

/// Quantile bin edges over `[0, 1]`: `edges[0] = 0`, `edges[last] = 1`,
/// strictly increasing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EqualMassBinning {
    edges: Vec<f64>,
}

impl EqualMassBinning {
    /// Cuts the sorted scores at rank quantiles. With `n` distinct scores and
    /// `B` requested bins the counts differ by at most one; ties shift cuts
    /// to the tie-block boundary and degenerate bins merge, so the effective
    /// number of bins can be smaller than requested.
    pub fn fit(scores: &[f64], n_bins: usize) -> Result<Self, BinningError> {
        if scores.is_empty() {
            return Err(BinningError::EmptyInput);
        }
        if n_bins == 0 {
            return Err(BinningError::NonPositiveBins);
        }
        let mut sorted = scores.to_vec();
        sorted.sort_unstable_by(f64::total_cmp);
        let n = sorted.len();
        let min = sorted[0];

        let mut edges = Vec::with_capacity(n_bins + 1);
        edges.push(0.0);
        for k in 1..n_bins {
            let cut = sorted[k * n / n_bins];
            // Ties never split: every sample equal to `cut` goes right of the
            // edge. Cuts at or below the minimum would leave an empty first
            // bin, and repeated cuts an empty middle bin; both are dropped.
            if cut > min && cut > *edges.last().unwrap() {
                edges.push(cut);
            }
        }
        if *edges.last().unwrap() >= 1.0 {
            edges.pop();
        }
        edges.push(1.0);
        Ok(Self { edges })
    }

    pub fn edges(&self) -> &[f64] {
        &self.edges
    }

    pub fn n_bins(&self) -> usize {
        self.edges.len() - 1
    }

    /// `(lo, hi)` bounds of bin `i`.
    pub fn bounds(&self, i: usize) -> (f64, f64) {
        (self.edges[i], self.edges[i + 1])
    }

    /// Index of the bin containing `score`; out-of-range scores clamp to the
    /// nearest bin.
    pub fn bin_index(&self, score: f64) -> usize {
        let last = self.n_bins() - 1;
        // First edge with edges[j] > score; the bin is the one before it.
        match self
            .edges
            .binary_search_by(|e| e.partial_cmp(&score).unwrap())
        {
            Ok(j) => j.min(last),
            Err(0) => 0,
            Err(j) => (j - 1).min(last),
        }
    }
}

/// Per-bin mass, mean score and mean label. `positives / mass` estimates the
/// calibration curve at that bin; empty bins carry no estimate.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CalibrationBin {
    pub lo: f64,
    pub hi: f64,
    pub mass: usize,
    pub positives: usize,
    pub mean_score: Option<f64>,
}

impl CalibrationBin {
    pub fn mean_label(&self) -> Option<f64> {
        (self.mass > 0).then(|| self.positives as f64 / self.mass as f64)
    }
}

/// Histogram estimate of the calibration curve `p ↦ E[Y | score = p]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CalibrationCurve {
    edges: Vec<f64>,
    bins: Vec<CalibrationBin>,
    n: usize,
}

impl CalibrationCurve {
    pub fn bins(&self) -> &[CalibrationBin] {
        &self.bins
    }

    pub fn edges(&self) -> &[f64] {
        &self.edges
    }

    pub fn n(&self) -> usize {
        self.n
    }
}

/// Per-bin mean label and mean score of `ds` under binning `b`.
pub fn estimate_calibration_curve(
    ds: &ScoredDataset,
    b: &EqualMassBinning,
) -> Result<CalibrationCurve, BinningError> {
    if ds.is_empty() {
        return Err(BinningError::EmptyDataset);
    }
    let mut mass = alloc::vec![0usize; b.n_bins()];
    let mut positives = alloc::vec![0usize; b.n_bins()];
    let mut score_sum = alloc::vec![0.0f64; b.n_bins()];
    for s in ds.samples() {
        let i = b.bin_index(s.score);
        mass[i] += 1;
        positives[i] += s.label as usize;
        score_sum[i] += s.score;
    }
    let bins = (0..b.n_bins())
        .map(|i| {
            let (lo, hi) = b.bounds(i);
            CalibrationBin {
                lo,
                hi,
                mass: mass[i],
                positives: positives[i],
                mean_score: (mass[i] > 0).then(|| score_sum[i] / mass[i] as f64),
            }
        })
        .collect();
    Ok(CalibrationCurve {
        edges: b.edges().to_vec(),
        bins,
        n: ds.len(),
    })
}
