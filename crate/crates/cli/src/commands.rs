//! The five commands: `report`, `posttrain`, `simulate`, `advise`, `sweep`.
//! All outputs are deterministic functions of (config, seed).

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use regretcal_core::dataset::{validate, DatasetSummary, ScoredDataset};
use regretcal_core::decision::{empirical_eu, ThresholdRule, UtilityMatrix};
use regretcal_core::grouping::{glar_apply, glar_fit, GlarConfig, PartitionConfig};
use regretcal_core::recalibration::{
    adjust_threshold, apply, histogram_binning_fit, isotonic_fit, logistic_refit, platt_fit,
    AdjustedThreshold, RecalibrationMap, DEFAULT_LOGISTIC_L2,
};
use regretcal_core::regret::{RegretReport, Verdict};
use regretcal_core::synthetic::{
    build_lb_tight, build_ub_tight, exact_regrets, exact_stats, random_oracle_with, sample,
    OracleConfig, OracleDistribution, TightnessSpec,
};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::config::RunConfig;
use crate::error::AppError;
use crate::io;
use crate::pipeline::{decision_results, DecisionResult, Pipeline};
use crate::plot;
use crate::sweep::{correlation_table, execute_suite, SweepSuite, ESTIMATORS, METHODS};
use crate::{DEFAULT_T_STAR_GRID, SCHEMA_VERSION};

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), AppError> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

fn ensure_out_dir(out: &Path) -> Result<(), AppError> {
    fs::create_dir_all(out)?;
    Ok(())
}

#[derive(Serialize)]
struct ReportDocument<'a> {
    schema_version: u32,
    config: &'a RunConfig,
    data: DataSection,
    results: &'a [DecisionResult],
}

#[derive(Serialize)]
struct DataSection {
    summary: DatasetSummary,
    fit1: usize,
    fit2: usize,
    eval: usize,
}

/// Full diagnostic report: `report.json`, `bins.csv`, `reliability.svg`,
/// `regret.svg`.
pub fn cmd_report(cfg: &RunConfig) -> Result<(), AppError> {
    cfg.validate()?;
    let problems = cfg.decision_problems()?;
    let ds = io::load_dataset(&cfg.input, &cfg.feature_prefix)?;
    let summary = validate(&ds)?;
    let pipeline = Pipeline::build(&ds, cfg)?;
    let results = decision_results(&pipeline, &problems, cfg.glar_gate)?;

    ensure_out_dir(&cfg.out)?;
    let document = ReportDocument {
        schema_version: SCHEMA_VERSION,
        config: cfg,
        data: DataSection {
            summary,
            fit1: pipeline.fit1.len(),
            fit2: pipeline.fit2.len(),
            eval: pipeline.eval.len(),
        },
        results: &results,
    };
    write_json(&cfg.out.join("report.json"), &document)?;
    io::write_bins_csv(&pipeline.curve, &cfg.out.join("bins.csv"))?;
    write_regret_bins_csv(&results, &cfg.out.join("regret_bins.csv"))?;
    let t_stars: Vec<f64> = problems.iter().map(|p| p.0).collect();
    fs::write(
        cfg.out.join("reliability.svg"),
        plot::reliability_svg(&pipeline.curve, &t_stars),
    )?;
    fs::write(cfg.out.join("regret.svg"), plot::regret_svg(&results))?;

    for result in &results {
        println!(
            "t*={}: r_hat={:.5} (rcl={:.5}, rgl={:.5}) -> {}",
            result.t_star,
            result.regret.r_hat,
            result.regret.rcl_hat,
            result.regret.rgl_hat,
            verdict_name(result.advice.verdict),
        );
    }
    Ok(())
}

/// Per-bin regret table across all decision problems, one row per
/// (threshold, bin).
fn write_regret_bins_csv(results: &[DecisionResult], path: &Path) -> Result<(), AppError> {
    let mut out = String::from(
        "t_star,bin,lo,hi,mass,mass_fraction,mean_score,c_hat,gl_hat,v_min,v_max,rcl_hat,lgl_hat,ugl_hat,rgl_hat,r_hat\n",
    );
    for result in results {
        for (i, b) in result.regret.bins.iter().enumerate() {
            let _ = writeln!(
                out,
                "{},{i},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
                result.t_star,
                b.lo,
                b.hi,
                b.mass,
                b.mass_fraction,
                b.mean_score,
                b.c_hat,
                b.gl_hat,
                b.v_min,
                b.v_max,
                b.rcl_hat,
                b.lgl_hat,
                b.ugl_hat,
                b.rgl_hat,
                b.r_hat
            );
        }
    }
    fs::write(path, out)?;
    Ok(())
}

fn verdict_name(v: Verdict) -> &'static str {
    match v {
        Verdict::NotSuboptimal => "not_suboptimal",
        Verdict::Recalibrate => "recalibrate",
        Verdict::AdvancedPostTraining => "advanced_post_training",
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
#[clap(rename_all = "lowercase")]
pub enum Method {
    Isotonic,
    Platt,
    Histogram,
    Threshold,
    Glar,
    Logistic,
}

impl Method {
    fn name(&self) -> &'static str {
        match self {
            Method::Isotonic => "isotonic",
            Method::Platt => "platt",
            Method::Histogram => "histogram",
            Method::Threshold => "threshold",
            Method::Glar => "glar",
            Method::Logistic => "logistic",
        }
    }
}

#[derive(Serialize)]
struct PosttrainResult {
    t_star: f64,
    eu_before: f64,
    eu_after: f64,
    gain: f64,
    /// Decision threshold applied to the (possibly corrected) scores.
    decision_threshold: f64,
    before: RegretReport,
    after: RegretReport,
}

/// Fit one post-training method on the fit folds, correct the evaluation
/// fold, and report the utility gain and before/after regret at each
/// threshold.
pub fn cmd_posttrain(cfg: &RunConfig, method: Method) -> Result<(), AppError> {
    cfg.validate()?;
    let problems = cfg.decision_problems()?;
    let ds = io::load_dataset(&cfg.input, &cfg.feature_prefix)?;
    let pipeline = Pipeline::build(&ds, cfg)?;
    let fit_union = pipeline.fit_union()?;
    ensure_out_dir(&cfg.out)?;

    // t*-independent corrections are fitted once.
    let fixed_map: Option<RecalibrationMap> = match method {
        Method::Isotonic => Some(RecalibrationMap::Isotonic(isotonic_fit(
            &fit_union.scores(),
            &fit_union.labels(),
        )?)),
        Method::Platt => {
            let fit = platt_fit(&fit_union.scores(), &fit_union.labels())?;
            if !fit.converged {
                eprintln!(
                    "warning: platt fit hit the iteration cap after {} iterations; using best iterate",
                    fit.iterations
                );
            }
            Some(RecalibrationMap::Platt(fit.map))
        }
        Method::Histogram => Some(RecalibrationMap::Histogram(histogram_binning_fit(
            &fit_union.scores(),
            &fit_union.labels(),
            cfg.bins,
        )?)),
        Method::Logistic => Some(RecalibrationMap::Linear(logistic_refit(
            &fit_union,
            DEFAULT_LOGISTIC_L2,
        )?)),
        Method::Threshold | Method::Glar => None,
    };
    let isotonic_curve = match method {
        Method::Threshold => Some(isotonic_fit(&fit_union.scores(), &fit_union.labels())?),
        _ => None,
    };

    let mut results = Vec::new();
    let mut gains_csv = String::from("t_star,eu_before,eu_after,gain,decision_threshold\n");
    for &(t_star, utility) in &problems {
        let rule = ThresholdRule::new(t_star);
        let eu_before = empirical_eu(&pipeline.eval, &utility, &rule)?;
        let before = decision_results(&pipeline, &[(t_star, utility)], cfg.glar_gate)?
            .pop()
            .expect("one result")
            .regret;

        // The corrected evaluation fold (and full dataset, for the
        // after-report) plus the threshold the corrected decisions use.
        let (eval_corrected, corrected_full, decision_threshold) = match method {
            Method::Threshold => {
                let curve = isotonic_curve.as_ref().expect("fitted above");
                let adjusted = adjust_threshold(curve, t_star)?;
                if adjusted == AdjustedThreshold::NeverReached {
                    eprintln!(
                        "note: calibration curve never reaches t*={t_star}; rule degenerates to constant 0"
                    );
                }
                (pipeline.eval.clone(), None, adjusted.threshold())
            }
            Method::Glar => {
                let glar_cfg = GlarConfig {
                    partition: PartitionConfig {
                        max_leaves: cfg.max_leaves,
                        min_leaf: cfg.min_leaf,
                    },
                    gate: cfg.glar_gate,
                    t_star,
                };
                let map = glar_fit(&pipeline.fit1, &pipeline.fit2, &pipeline.binning, &glar_cfg)?;
                let correct = |target: &ScoredDataset| -> Result<ScoredDataset, AppError> {
                    let scores: Vec<f64> = target
                        .samples()
                        .iter()
                        .map(|s| glar_apply(&map, s))
                        .collect::<Result<_, _>>()?;
                    Ok(target.with_scores(&scores)?)
                };
                write_json(
                    &cfg.out.join(format!("glar_map_tstar_{t_star}.json")),
                    &map,
                )?;
                (correct(&pipeline.eval)?, Some(correct(&ds)?), t_star)
            }
            _ => {
                let map = fixed_map.as_ref().expect("fitted above");
                (apply(map, &pipeline.eval)?, Some(apply(map, &ds)?), t_star)
            }
        };
        let eu_after = empirical_eu(
            &eval_corrected,
            &utility,
            &ThresholdRule::new(decision_threshold),
        )?;

        // Regret of the corrected rule, re-estimated through the same
        // protocol on the corrected data. Threshold adjustment changes the
        // rule, not the scores, so its after-report reuses the original
        // pipeline at t_f.
        let after = match corrected_full {
            None => regretcal_core::regret::regret_report(
                &pipeline.eval,
                &pipeline.gl,
                &pipeline.curve,
                &utility,
                decision_threshold,
            )?,
            Some(corrected) => {
                let corrected_pipeline = Pipeline::build(&corrected, cfg)?;
                decision_results(&corrected_pipeline, &[(t_star, utility)], cfg.glar_gate)?
                    .pop()
                    .expect("one result")
                    .regret
            }
        };

        io::save_csv(
            &eval_corrected,
            &cfg.out.join(format!("corrected_tstar_{t_star}.csv")),
            &cfg.feature_prefix,
        )?;
        let _ = writeln!(
            gains_csv,
            "{t_star},{eu_before},{eu_after},{},{decision_threshold}",
            eu_after - eu_before
        );
        results.push(PosttrainResult {
            t_star,
            eu_before,
            eu_after,
            gain: eu_after - eu_before,
            decision_threshold,
            before,
            after,
        });
        println!(
            "t*={t_star}: gain {:+.5} ({} -> {})",
            eu_after - eu_before,
            eu_before,
            eu_after
        );
    }

    if let Some(map) = &fixed_map {
        write_json(&cfg.out.join("map.json"), map)?;
    }
    let document = json!({
        "schema_version": SCHEMA_VERSION,
        "config": cfg,
        "method": method.name(),
        "results": results,
    });
    write_json(&cfg.out.join("posttrain.json"), &document)?;
    fs::write(cfg.out.join("gains.csv"), gains_csv)?;
    Ok(())
}

/// Oracle specification for `simulate`: either an extremal construction or
/// a random generator.
#[derive(Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SimulateSpec {
    LowerTight {
        c: f64,
        v: f64,
        t: f64,
    },
    UpperTight {
        c: f64,
        v: f64,
        t: f64,
    },
    Random {
        seed: u64,
        n_levels: usize,
        atoms_per_level: usize,
        #[serde(default = "default_unit")]
        miscalibration: f64,
        #[serde(default = "default_unit")]
        spread: f64,
        #[serde(default)]
        monotone_curve: bool,
    },
}

fn default_unit() -> f64 {
    1.0
}

/// Build the oracle, sample a dataset, and write the exact reference values
/// alongside: `dataset.csv`, `oracle.json`, `exact.json`.
pub fn cmd_simulate(spec_path: &Path, n: usize, seed: u64, out: &Path) -> Result<(), AppError> {
    if n == 0 {
        return Err(AppError::config("--n must be positive"));
    }
    let text = fs::read_to_string(spec_path)
        .map_err(|e| AppError::data(format!("{}: {e}", spec_path.display())))?;
    let spec: SimulateSpec =
        serde_json::from_str(&text).map_err(|e| AppError::config(format!("spec: {e}")))?;

    let (oracle, thresholds): (OracleDistribution, Vec<f64>) = match spec {
        SimulateSpec::LowerTight { c, v, t } => {
            (build_lb_tight(&TightnessSpec { c, v, t })?, vec![t])
        }
        SimulateSpec::UpperTight { c, v, t } => {
            (build_ub_tight(&TightnessSpec { c, v, t })?, vec![t])
        }
        SimulateSpec::Random {
            seed,
            n_levels,
            atoms_per_level,
            miscalibration,
            spread,
            monotone_curve,
        } => (
            random_oracle_with(&OracleConfig {
                seed,
                n_levels,
                atoms_per_level,
                miscalibration,
                spread,
                monotone_curve,
            }),
            DEFAULT_T_STAR_GRID.to_vec(),
        ),
    };

    ensure_out_dir(out)?;
    let ds = sample(&oracle, n, seed)?;
    io::save_csv(&ds, &out.join("dataset.csv"), "f")?;
    write_json(&out.join("oracle.json"), &oracle)?;

    let exact: Vec<serde_json::Value> = thresholds
        .iter()
        .map(|&t| -> Result<serde_json::Value, AppError> {
            let u = UtilityMatrix::from_t_star(t)?;
            let regrets = exact_regrets(&oracle, &u, t);
            Ok(json!({
                "t_star": t,
                "levels": exact_stats(&oracle, t),
                "rcl": regrets.rcl,
                "rgl": regrets.rgl,
                "r": regrets.r,
                "eu_naive": regrets.eu_naive,
                "eu_recalibrated": regrets.eu_recalibrated,
                "eu_oracle": regrets.eu_oracle,
            }))
        })
        .collect::<Result<_, _>>()?;
    write_json(
        &out.join("exact.json"),
        &json!({
            "schema_version": SCHEMA_VERSION,
            "n": n,
            "seed": seed,
            "exact": exact,
        }),
    )?;
    println!(
        "simulated {n} samples from {} atoms over {} levels",
        oracle.atoms().len(),
        oracle.levels().len()
    );
    Ok(())
}

/// Run the report pipeline and emit only the advisory verdicts.
pub fn cmd_advise(cfg: &RunConfig) -> Result<(), AppError> {
    cfg.validate()?;
    let problems = cfg.decision_problems()?;
    let ds = io::load_dataset(&cfg.input, &cfg.feature_prefix)?;
    let pipeline = Pipeline::build(&ds, cfg)?;
    let results = decision_results(&pipeline, &problems, cfg.glar_gate)?;

    let worst = results
        .iter()
        .max_by(|a, b| a.regret.r_hat.total_cmp(&b.regret.r_hat))
        .expect("at least one decision problem");
    let advice_rows: Vec<serde_json::Value> = results
        .iter()
        .map(|r| {
            json!({
                "t_star": r.t_star,
                "advice": r.advice,
            })
        })
        .collect();

    ensure_out_dir(&cfg.out)?;
    write_json(
        &cfg.out.join("advice.json"),
        &json!({
            "schema_version": SCHEMA_VERSION,
            "config": cfg,
            "per_t_star": advice_rows,
            "worst": {
                "t_star": worst.t_star,
                "advice": worst.advice,
            },
        }),
    )?;
    println!(
        "{}: r_hat={:.5} (rcl={:.5}, rgl={:.5}) at t*={} [gate {}]",
        verdict_name(worst.advice.verdict),
        worst.regret.r_hat,
        worst.regret.rcl_hat,
        worst.regret.rgl_hat,
        worst.t_star,
        cfg.glar_gate
    );
    Ok(())
}

/// Execute a sweep suite and write the scatter rows plus the correlation
/// table.
pub fn cmd_sweep(suite_path: &Path, out: &Path, threads: Option<usize>) -> Result<(), AppError> {
    let text = fs::read_to_string(suite_path)
        .map_err(|e| AppError::data(format!("{}: {e}", suite_path.display())))?;
    let suite: SweepSuite =
        serde_json::from_str(&text).map_err(|e| AppError::config(format!("suite: {e}")))?;
    let outcomes = execute_suite(&suite, threads)?;

    ensure_out_dir(out)?;
    let mut scatter = String::from("seed,t_star,miscalibration,spread,n_levels,atoms_per_level,n,eu_before");
    for name in ESTIMATORS {
        let _ = write!(scatter, ",{name}");
    }
    for name in METHODS {
        let _ = write!(scatter, ",gain_{name}");
    }
    scatter.push('\n');
    for o in &outcomes {
        let _ = write!(
            scatter,
            "{},{},{},{},{},{},{},{}",
            o.run.seed,
            o.run.t_star,
            o.run.miscalibration,
            o.run.spread,
            o.run.n_levels,
            o.run.atoms_per_level,
            o.run.n,
            o.eu_before
        );
        for v in o.estimators {
            let _ = write!(scatter, ",{v}");
        }
        for v in o.gains {
            let _ = write!(scatter, ",{v}");
        }
        scatter.push('\n');
    }
    fs::write(out.join("scatter.csv"), scatter)?;

    let mut corr = String::from("estimator,method,r2\n");
    for (estimator, method, r2) in correlation_table(&outcomes) {
        let r2_text = r2.map(|v| v.to_string()).unwrap_or_default();
        let _ = writeln!(corr, "{estimator},{method},{r2_text}");
    }
    fs::write(out.join("correlations.csv"), corr)?;

    for (estimator, method, r2) in correlation_table(&outcomes) {
        if estimator == "rcl_hat" && method == "isotonic" || estimator == "r_hat" {
            if let Some(v) = r2 {
                println!("r2({estimator}, {method} gain) = {v:.3}");
            }
        }
    }
    Ok(())
}
