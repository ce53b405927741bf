//! Utility matrices, optimal thresholds, and expected utility.
//!
//! `U[d][y]` is the payoff of deciding `d` when the outcome is `y`. With
//! `UΔ = U00 - U10 + U11 - U01 > 0`, the rule that maximizes pointwise
//! expected utility thresholds the true conditional probability at
//! `t* = (U00 - U10) / UΔ`, deciding 1 on ties.

use serde::Serialize;
use thiserror::Error;

use crate::dataset::ScoredDataset;

#[derive(Debug, Error, PartialEq)]
pub enum DecisionError {
    #[error("utility matrix is degenerate: u_delta = {u_delta} must be positive")]
    DegenerateUtility { u_delta: f64 },
    #[error("optimal threshold {t_star} falls outside [0, 1]")]
    ThresholdOutOfRange { t_star: f64 },
    #[error("threshold {t_star} must lie strictly inside (0, 1)")]
    ThresholdAtBoundary { t_star: f64 },
    #[error("dataset is empty")]
    EmptyDataset,
}

/// Validated 2x2 payoff table. `u01` is the cost side of a false negative
/// (deciding 0 when the outcome is 1), `u10` of a false positive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct UtilityMatrix {
    u00: f64,
    u01: f64,
    u10: f64,
    u11: f64,
}

impl UtilityMatrix {
    pub fn new(u00: f64, u01: f64, u10: f64, u11: f64) -> Result<Self, DecisionError> {
        let m = Self { u00, u01, u10, u11 };
        let u_delta = m.u_delta();
        if !(u_delta > 0.0) || !u_delta.is_finite() {
            return Err(DecisionError::DegenerateUtility { u_delta });
        }
        let t_star = m.t_star();
        if !(0.0..=1.0).contains(&t_star) {
            return Err(DecisionError::ThresholdOutOfRange { t_star });
        }
        Ok(m)
    }

    /// The one-parameter family `[[1, 0], [0, 1/t* - 1]]` whose optimal
    /// threshold is exactly `t*`.
    pub fn from_t_star(t_star: f64) -> Result<Self, DecisionError> {
        if !(t_star > 0.0 && t_star < 1.0) {
            return Err(DecisionError::ThresholdAtBoundary { t_star });
        }
        Self::new(1.0, 0.0, 0.0, 1.0 / t_star - 1.0)
    }

    pub fn u00(&self) -> f64 {
        self.u00
    }

    pub fn u01(&self) -> f64 {
        self.u01
    }

    pub fn u10(&self) -> f64 {
        self.u10
    }

    pub fn u11(&self) -> f64 {
        self.u11
    }

    pub fn u_delta(&self) -> f64 {
        self.u00 - self.u10 + self.u11 - self.u01
    }

    /// Optimal decision threshold `(u00 - u10) / u_delta`.
    pub fn t_star(&self) -> f64 {
        (self.u00 - self.u10) / self.u_delta()
    }

    pub fn payoff(&self, decision: bool, outcome: bool) -> f64 {
        match (decision, outcome) {
            (false, false) => self.u00,
            (false, true) => self.u01,
            (true, false) => self.u10,
            (true, true) => self.u11,
        }
    }
}

/// Decide 1 iff `score >= threshold`; ties go to 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ThresholdRule {
    pub threshold: f64,
}

impl ThresholdRule {
    pub fn new(threshold: f64) -> Self {
        Self { threshold }
    }

    pub fn decide(&self, score: f64) -> bool {
        score >= self.threshold
    }
}

/// `(1/n) Σ U[decide(score_i), y_i]` over the dataset.
pub fn empirical_eu(
    ds: &ScoredDataset,
    u: &UtilityMatrix,
    rule: &ThresholdRule,
) -> Result<f64, DecisionError> {
    if ds.is_empty() {
        return Err(DecisionError::EmptyDataset);
    }
    let total: f64 = ds
        .samples()
        .iter()
        .map(|s| u.payoff(rule.decide(s.score), s.label))
        .sum();
    Ok(total / ds.len() as f64)
}

/// Expected utility of a fixed decision when the outcome is Bernoulli with
/// the given probability: `UΔ·δ·(p - t*) + p·u01 + (1-p)·u00`.
pub fn pointwise_eu(true_prob: f64, u: &UtilityMatrix, decision: bool) -> f64 {
    let d = if decision { 1.0 } else { 0.0 };
    u.u_delta() * d * (true_prob - u.t_star()) + true_prob * u.u01 + (1.0 - true_prob) * u.u00
}

/// Empirical gain of a candidate rule over a baseline at the same utilities.
pub fn empirical_gain(
    ds_after: &ScoredDataset,
    ds_before: &ScoredDataset,
    u: &UtilityMatrix,
    rule: &ThresholdRule,
) -> Result<f64, DecisionError> {
    Ok(empirical_eu(ds_after, u, rule)? - empirical_eu(ds_before, u, rule)?)
}
