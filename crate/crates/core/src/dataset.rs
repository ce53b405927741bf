//! Prediction datasets: scores, binary labels, optional feature vectors.
//!
//! A [`ScoredDataset`] is the empirical material every estimator in this
//! crate consumes. Datasets are immutable after construction and safe to
//! share across threads. Seeded splitting supports the honest protocol
//! (partition fitted on one fold, local averages estimated on another).

use alloc::vec::Vec;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng::SplitMix64;

#[derive(Debug, Error, PartialEq)]
pub enum DatasetError {
    #[error("score {score} at sample {index} is outside [0, 1]")]
    ScoreOutOfRange { index: usize, score: f64 },
    #[error("sample {index} has {got} features, expected {expected}")]
    InconsistentFeatureDim {
        index: usize,
        expected: usize,
        got: usize,
    },
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("dataset has {got} samples, need at least {needed}")]
    TooFewSamples { needed: usize, got: usize },
    #[error("split fractions must be strictly positive and sum to 1")]
    BadFractions,
    #[error("replacement scores have length {got}, dataset has {expected}")]
    ScoreLengthMismatch { expected: usize, got: usize },
}

/// One prediction: a score in `[0, 1]`, the observed binary outcome, and an
/// optional feature vector (empty = no features).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredSample {
    pub score: f64,
    pub label: bool,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub features: Vec<f64>,
}

impl ScoredSample {
    pub fn new(score: f64, label: bool) -> Self {
        Self {
            score,
            label,
            features: Vec::new(),
        }
    }

    pub fn with_features(score: f64, label: bool, features: Vec<f64>) -> Self {
        Self {
            score,
            label,
            features,
        }
    }

    pub fn label_value(&self) -> f64 {
        if self.label {
            1.0
        } else {
            0.0
        }
    }
}

/// Ordered, validated collection of [`ScoredSample`]s.
///
/// `origin` tracks the indices each sample had in the dataset it was split
/// from; it lets honest-protocol estimators reject overlapping folds. It is
/// `None` for datasets that were never split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredDataset {
    samples: Vec<ScoredSample>,
    feature_dim: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    origin: Option<Vec<u64>>,
}

impl ScoredDataset {
    /// Validates scores and feature dimensions. All samples must carry
    /// features of the same length, or none at all.
    pub fn new(samples: Vec<ScoredSample>) -> Result<Self, DatasetError> {
        let feature_dim = samples.first().map_or(0, |s| s.features.len());
        for (index, s) in samples.iter().enumerate() {
            if !(0.0..=1.0).contains(&s.score) || !s.score.is_finite() {
                return Err(DatasetError::ScoreOutOfRange {
                    index,
                    score: s.score,
                });
            }
            if s.features.len() != feature_dim {
                return Err(DatasetError::InconsistentFeatureDim {
                    index,
                    expected: feature_dim,
                    got: s.features.len(),
                });
            }
        }
        Ok(Self {
            samples,
            feature_dim,
            origin: None,
        })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn feature_dim(&self) -> usize {
        self.feature_dim
    }

    pub fn samples(&self) -> &[ScoredSample] {
        &self.samples
    }

    pub fn scores(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.score).collect()
    }

    pub fn labels(&self) -> Vec<bool> {
        self.samples.iter().map(|s| s.label).collect()
    }

    pub fn positive_count(&self) -> usize {
        self.samples.iter().filter(|s| s.label).count()
    }

    /// Origin indices relative to the dataset this one was split from.
    pub fn origin(&self) -> Option<&[u64]> {
        self.origin.as_deref()
    }

    /// Same labels, features and origin, new scores (used by recalibration).
    pub fn with_scores(&self, scores: &[f64]) -> Result<Self, DatasetError> {
        if scores.len() != self.samples.len() {
            return Err(DatasetError::ScoreLengthMismatch {
                expected: self.samples.len(),
                got: scores.len(),
            });
        }
        let samples: Vec<ScoredSample> = self
            .samples
            .iter()
            .zip(scores)
            .map(|(s, &score)| ScoredSample {
                score,
                label: s.label,
                features: s.features.clone(),
            })
            .collect();
        let mut out = Self::new(samples)?;
        out.origin = self.origin.clone();
        Ok(out)
    }

    /// Concatenation, dropping origin tracking (the union of two folds is a
    /// new fitting set, not a fold of anything).
    pub fn concat(&self, other: &ScoredDataset) -> Result<Self, DatasetError> {
        let mut samples = self.samples.clone();
        samples.extend(other.samples.iter().cloned());
        Self::new(samples)
    }

    fn take(&self, indices: &[usize]) -> Self {
        let samples = indices.iter().map(|&i| self.samples[i].clone()).collect();
        let origin = Some(match &self.origin {
            Some(ids) => indices.iter().map(|&i| ids[i]).collect(),
            None => indices.iter().map(|&i| i as u64).collect(),
        });
        Self {
            samples,
            feature_dim: self.feature_dim,
            origin,
        }
    }
}

/// How to split a dataset: fractions for the fit and eval parts, a seed for
/// the permutation, and whether the fit part is halved again for honest
/// partition fitting.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub fit_fraction: f64,
    pub eval_fraction: f64,
    pub seed: u64,
    pub honest: bool,
}

impl SplitSpec {
    pub fn new(fit_fraction: f64, eval_fraction: f64, seed: u64, honest: bool) -> Self {
        Self {
            fit_fraction,
            eval_fraction,
            seed,
            honest,
        }
    }
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self {
            fit_fraction: 0.5,
            eval_fraction: 0.5,
            seed: 0,
            honest: true,
        }
    }
}

/// Result of [`split`]. Honest mode yields two disjoint fit folds.
#[derive(Debug, Clone)]
pub enum SplitParts {
    Plain {
        fit: ScoredDataset,
        eval: ScoredDataset,
    },
    Honest {
        fit1: ScoredDataset,
        fit2: ScoredDataset,
        eval: ScoredDataset,
    },
}

/// Seeded uniform-permutation split. Parts are disjoint, their union is the
/// input, and the outcome depends only on `(dataset, spec.seed)`.
pub fn split(ds: &ScoredDataset, spec: &SplitSpec) -> Result<SplitParts, DatasetError> {
    if spec.fit_fraction <= 0.0
        || spec.eval_fraction <= 0.0
        || (spec.fit_fraction + spec.eval_fraction - 1.0).abs() > 1e-9
    {
        return Err(DatasetError::BadFractions);
    }
    let n = ds.len();
    let minimum = if spec.honest { 4 } else { 2 };
    if n < minimum {
        return Err(DatasetError::TooFewSamples {
            needed: minimum,
            got: n,
        });
    }

    let mut order: Vec<usize> = (0..n).collect();
    SplitMix64::new(spec.seed).shuffle(&mut order);

    let n_fit = (crate::math::round(spec.fit_fraction * n as f64) as usize).clamp(1, n - 1);
    let (fit_idx, eval_idx) = order.split_at(n_fit);

    if spec.honest {
        let half = n_fit / 2;
        if half == 0 || n_fit - half == 0 {
            return Err(DatasetError::TooFewSamples {
                needed: minimum,
                got: n,
            });
        }
        let (fit1_idx, fit2_idx) = fit_idx.split_at(half);
        Ok(SplitParts::Honest {
            fit1: ds.take(fit1_idx),
            fit2: ds.take(fit2_idx),
            eval: ds.take(eval_idx),
        })
    } else {
        Ok(SplitParts::Plain {
            fit: ds.take(fit_idx),
            eval: ds.take(eval_idx),
        })
    }
}

/// Basic facts about a dataset, reported exactly.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DatasetSummary {
    pub n: usize,
    pub positive_rate: f64,
    pub score_min: f64,
    pub score_max: f64,
    pub feature_dim: usize,
}

pub fn validate(ds: &ScoredDataset) -> Result<DatasetSummary, DatasetError> {
    if ds.is_empty() {
        return Err(DatasetError::EmptyDataset);
    }
    let mut score_min = f64::INFINITY;
    let mut score_max = f64::NEG_INFINITY;
    for s in ds.samples() {
        score_min = score_min.min(s.score);
        score_max = score_max.max(s.score);
    }
    Ok(DatasetSummary {
        n: ds.len(),
        positive_rate: ds.positive_count() as f64 / ds.len() as f64,
        score_min,
        score_max,
        feature_dim: ds.feature_dim(),
    })
}
