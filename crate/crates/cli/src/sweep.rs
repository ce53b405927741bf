//! Synthetic correlation sweeps: run a suite of (oracle, threshold)
//! configurations, estimate the regret decomposition and baseline metrics
//! on a fresh evaluation sample, measure the realized utility gain of each
//! post-training method, and correlate estimators with gains.

use rayon::prelude::*;
use regretcal_core::binning::{estimate_calibration_curve, EqualMassBinning};
use regretcal_core::dataset::{split, ScoredDataset, SplitParts, SplitSpec};
use regretcal_core::decision::{empirical_eu, ThresholdRule, UtilityMatrix};
use regretcal_core::grouping::{
    estimate_gl, fit_partition, glar_apply, glar_fit, GlarConfig, PartitionConfig,
};
use regretcal_core::metrics::{metrics_report, pearson_r2};
use regretcal_core::recalibration::{
    adjust_threshold, apply, histogram_binning_fit, isotonic_fit, logistic_refit, platt_fit,
    RecalibrationMap, DEFAULT_LOGISTIC_L2,
};
use regretcal_core::regret::regret_report;
use regretcal_core::synthetic::{random_oracle_with, sample, OracleConfig};
use serde::{Deserialize, Serialize};

use crate::error::AppError;

/// One sweep configuration: an oracle generator plus the decision problem.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SweepRun {
    pub seed: u64,
    pub n_levels: usize,
    pub atoms_per_level: usize,
    /// Scale of the injected score-vs-truth offset per level, 0 to 1.
    pub miscalibration: f64,
    /// Scale of the within-level dispersion of true probabilities, 0 to 1.
    pub spread: f64,
    pub t_star: f64,
    /// Samples per fold (one training draw, one evaluation draw).
    pub n: usize,
    /// Re-pair scores with level means rank to rank so the calibration
    /// curve is monotone (the regime recalibration can fully exploit).
    #[serde(default)]
    pub monotone_curve: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepSuite {
    pub runs: Vec<SweepRun>,
    #[serde(default = "default_bins")]
    pub bins: usize,
    #[serde(default = "default_max_leaves")]
    pub max_leaves: usize,
    #[serde(default = "default_min_leaf")]
    pub min_leaf: usize,
    #[serde(default = "default_gate")]
    pub glar_gate: f64,
}

fn default_bins() -> usize {
    15
}
fn default_max_leaves() -> usize {
    5
}
fn default_min_leaf() -> usize {
    10
}
fn default_gate() -> f64 {
    0.02
}

pub const METHODS: [&str; 6] = [
    "isotonic",
    "platt",
    "histogram",
    "threshold",
    "glar",
    "logistic",
];

pub const ESTIMATORS: [&str; 9] = [
    "rcl_hat", "rgl_hat", "r_hat", "ece", "mce", "cl", "rmsce", "brier", "auc",
];

/// Estimators and realized gains for one run.
#[derive(Debug, Clone, Serialize)]
pub struct RunOutcome {
    pub run: SweepRun,
    pub eu_before: f64,
    pub estimators: [f64; 9],
    pub gains: [f64; 6],
}

pub fn execute_run(run: &SweepRun, suite: &SweepSuite) -> Result<RunOutcome, AppError> {
    let oracle = random_oracle_with(&OracleConfig {
        seed: run.seed,
        n_levels: run.n_levels,
        atoms_per_level: run.atoms_per_level,
        miscalibration: run.miscalibration,
        spread: run.spread,
        monotone_curve: run.monotone_curve,
    });
    let train = sample(&oracle, run.n, run.seed.wrapping_mul(2).wrapping_add(1))?;
    let eval = sample(&oracle, run.n, run.seed.wrapping_mul(2).wrapping_add(2))?;
    let SplitParts::Plain { fit: fit1, eval: fit2 } =
        split(&train, &SplitSpec::new(0.5, 0.5, run.seed, false))?
    else {
        unreachable!()
    };

    let binning = EqualMassBinning::fit(&train.scores(), suite.bins)?;
    let tree_cfg = PartitionConfig {
        max_leaves: suite.max_leaves,
        min_leaf: suite.min_leaf,
    };
    let partition = fit_partition(&fit1, &binning, &tree_cfg)?;
    let gl = estimate_gl(&fit2, &binning, &partition)?;
    let curve = estimate_calibration_curve(&eval, &binning)?;

    let u = UtilityMatrix::from_t_star(run.t_star)?;
    let report = regret_report(&eval, &gl, &curve, &u, run.t_star)?;
    let metrics = metrics_report(&eval, &binning, run.t_star)?;
    let estimators = [
        report.rcl_hat,
        report.rgl_hat,
        report.r_hat,
        metrics.ece,
        metrics.mce,
        metrics.cl,
        metrics.rmsce,
        metrics.brier,
        metrics.auc,
    ];

    let rule = ThresholdRule::new(run.t_star);
    let eu_before = empirical_eu(&eval, &u, &rule)?;
    let eu_of = |corrected: &ScoredDataset| -> Result<f64, AppError> {
        Ok(empirical_eu(corrected, &u, &rule)?)
    };

    let iso = isotonic_fit(&train.scores(), &train.labels())?;
    let gain_isotonic = eu_of(&apply(&RecalibrationMap::Isotonic(iso.clone()), &eval)?)? - eu_before;

    let platt = platt_fit(&train.scores(), &train.labels())?;
    let gain_platt = eu_of(&apply(&RecalibrationMap::Platt(platt.map), &eval)?)? - eu_before;

    let histogram = histogram_binning_fit(&train.scores(), &train.labels(), suite.bins)?;
    let gain_histogram = eu_of(&apply(&RecalibrationMap::Histogram(histogram), &eval)?)? - eu_before;

    let t_f = adjust_threshold(&iso, run.t_star)?.threshold();
    let gain_threshold = empirical_eu(&eval, &u, &ThresholdRule::new(t_f))? - eu_before;

    let glar_cfg = GlarConfig {
        partition: tree_cfg,
        gate: suite.glar_gate,
        t_star: run.t_star,
    };
    let glar = glar_fit(&fit1, &fit2, &binning, &glar_cfg)?;
    let glar_scores: Vec<f64> = eval
        .samples()
        .iter()
        .map(|s| glar_apply(&glar, s))
        .collect::<Result<_, _>>()?;
    let gain_glar = eu_of(&eval.with_scores(&glar_scores)?)? - eu_before;

    let logit = logistic_refit(&train, DEFAULT_LOGISTIC_L2)?;
    let gain_logistic = eu_of(&apply(&RecalibrationMap::Linear(logit), &eval)?)? - eu_before;

    Ok(RunOutcome {
        run: *run,
        eu_before,
        estimators,
        gains: [
            gain_isotonic,
            gain_platt,
            gain_histogram,
            gain_threshold,
            gain_glar,
            gain_logistic,
        ],
    })
}

/// Run the whole suite, in parallel unless `threads` caps it to one.
pub fn execute_suite(suite: &SweepSuite, threads: Option<usize>) -> Result<Vec<RunOutcome>, AppError> {
    if suite.runs.is_empty() {
        return Err(AppError::config("sweep suite lists no runs"));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.unwrap_or(0))
        .build()
        .map_err(|e| AppError::Numeric(e.to_string()))?;
    pool.install(|| {
        suite
            .runs
            .par_iter()
            .map(|run| execute_run(run, suite))
            .collect()
    })
}

/// Squared Pearson correlation of every (estimator, method-gain) pair.
pub fn correlation_table(outcomes: &[RunOutcome]) -> Vec<(String, String, Option<f64>)> {
    let mut table = Vec::new();
    for (ei, estimator) in ESTIMATORS.iter().enumerate() {
        let xs: Vec<f64> = outcomes.iter().map(|o| o.estimators[ei]).collect();
        for (mi, method) in METHODS.iter().enumerate() {
            let ys: Vec<f64> = outcomes.iter().map(|o| o.gains[mi]).collect();
            table.push((estimator.to_string(), method.to_string(), pearson_r2(&xs, &ys)));
        }
    }
    table
}

/// The fixed 60-configuration suite used by the desk-scale correlation
/// checks: six miscalibration levels crossed with five dispersion levels
/// and five mid-range thresholds.
pub fn desk_suite(n: usize) -> SweepSuite {
    let miscal = [0.0, 0.2, 0.4, 0.6, 0.8, 1.0];
    let spreads = [0.1, 0.3, 0.5, 0.7, 0.9];
    let t_stars = [0.1, 0.25, 0.5, 0.75, 0.9];
    let runs = (0..60u64)
        .map(|i| SweepRun {
            seed: 9000 + i,
            n_levels: 8,
            atoms_per_level: 3,
            miscalibration: miscal[(i % 6) as usize],
            spread: spreads[(i % 5) as usize],
            t_star: t_stars[((i / 12) % 5) as usize],
            n,
            monotone_curve: true,
        })
        .collect();
    SweepSuite {
        runs,
        bins: default_bins(),
        max_leaves: default_max_leaves(),
        min_leaf: default_min_leaf(),
        glar_gate: default_gate(),
    }
}
