//! Shared estimation pipeline: honest three-way split, equal-mass binning
//! fitted on the training folds, calibration curve on the evaluation fold,
//! and honest grouping-loss estimation (tree on the first fit fold, region
//! means on the second).

use regretcal_core::binning::{estimate_calibration_curve, CalibrationCurve, EqualMassBinning};
use regretcal_core::dataset::{split, ScoredDataset, SplitParts, SplitSpec};
use regretcal_core::decision::UtilityMatrix;
use regretcal_core::grouping::{
    estimate_gl, fit_partition, GroupingLossEstimate, PartitionConfig, RegionPartition,
};
use regretcal_core::metrics::{metrics_report, MetricsReport};
use regretcal_core::regret::{advise, regret_report, Advice, RegretReport};
use serde::Serialize;

use crate::config::RunConfig;
use crate::error::AppError;

pub struct Pipeline {
    pub fit1: ScoredDataset,
    pub fit2: ScoredDataset,
    pub eval: ScoredDataset,
    pub binning: EqualMassBinning,
    pub curve: CalibrationCurve,
    pub gl: GroupingLossEstimate,
}

impl Pipeline {
    /// Assemble the estimation objects for a dataset. Without features the
    /// partition is trivial and the grouping-loss estimate is identically
    /// zero.
    pub fn build(ds: &ScoredDataset, cfg: &RunConfig) -> Result<Self, AppError> {
        let spec = SplitSpec::new(cfg.fit_fraction, 1.0 - cfg.fit_fraction, cfg.seed, true);
        let SplitParts::Honest { fit1, fit2, eval } = split(ds, &spec)? else {
            unreachable!("honest split requested")
        };

        let mut fit_scores = fit1.scores();
        fit_scores.extend(fit2.scores());
        let binning = EqualMassBinning::fit(&fit_scores, cfg.bins)?;

        let partition = if ds.feature_dim() == 0 {
            RegionPartition::trivial(&binning)
        } else {
            let tree_cfg = PartitionConfig {
                max_leaves: cfg.max_leaves,
                min_leaf: cfg.min_leaf,
            };
            fit_partition(&fit1, &binning, &tree_cfg)?
        };
        let gl = estimate_gl(&fit2, &binning, &partition)?;
        let curve = estimate_calibration_curve(&eval, &binning)?;

        Ok(Self {
            fit1,
            fit2,
            eval,
            binning,
            curve,
            gl,
        })
    }

    pub fn fit_union(&self) -> Result<ScoredDataset, AppError> {
        Ok(self.fit1.concat(&self.fit2)?)
    }
}

/// Everything the report carries for one decision problem.
#[derive(Debug, Clone, Serialize)]
pub struct DecisionResult {
    pub t_star: f64,
    pub utility: UtilityMatrix,
    pub regret: RegretReport,
    pub baseline_metrics: MetricsReport,
    pub advice: Advice,
}

/// Evaluate the rule `1{score >= t*}` for each decision problem.
pub fn decision_results(
    pipeline: &Pipeline,
    problems: &[(f64, UtilityMatrix)],
    advice_gate: f64,
) -> Result<Vec<DecisionResult>, AppError> {
    problems
        .iter()
        .map(|&(t_star, utility)| {
            let regret = regret_report(
                &pipeline.eval,
                &pipeline.gl,
                &pipeline.curve,
                &utility,
                t_star,
            )?;
            let baseline_metrics = metrics_report(&pipeline.eval, &pipeline.binning, t_star)?;
            let advice = advise(&regret, advice_gate);
            Ok(DecisionResult {
                t_star,
                utility,
                regret,
                baseline_metrics,
                advice,
            })
        })
        .collect()
}
