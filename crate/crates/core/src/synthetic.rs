//! Exact discrete oracles: finite joints of (X, Y) with explicit true and
//! estimated probabilities, on which every calibration and regret quantity
//! has a closed form.
//!
//! These are the ground truth the estimators are validated against. The
//! module also builds the extremal distributions that attain the grouping
//! regret bounds, enumerates all level-set decision rules by brute force,
//! and samples i.i.d. datasets for estimator-consistency experiments.

use alloc::vec;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{ScoredDataset, ScoredSample};
use crate::decision::{pointwise_eu, UtilityMatrix};
use crate::math;
use crate::rng::SplitMix64;

#[derive(Debug, Error, PartialEq)]
pub enum SyntheticError {
    #[error("atom masses sum to {sum}, expected 1")]
    MassNotNormalized { sum: f64 },
    #[error("atom {index} has a mass or probability outside [0, 1]")]
    AtomOutOfRange { index: usize },
    #[error("oracle has no atoms")]
    EmptyOracle,
    #[error("inadmissible construction: {reason}")]
    InadmissibleSpec { reason: &'static str },
    #[error("upper-bound construction is only tight at t = 1/2, got {t}")]
    UnsupportedThreshold { t: f64 },
    #[error("{levels} score levels exceed the enumeration limit of {max}")]
    TooManyLevels { levels: usize, max: usize },
    #[error("sample count must be positive")]
    InvalidSampleCount,
}

/// One atom of the joint: probability mass `z`, true conditional probability
/// `fstar`, model score `f`, and an integer feature tag `x`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OracleAtom {
    #[serde(rename = "z")]
    pub mass: f64,
    #[serde(rename = "fstar")]
    pub true_prob: f64,
    #[serde(rename = "f")]
    pub score: f64,
    #[serde(rename = "x")]
    pub tag: u64,
}

/// Finite discrete joint distribution of (X, Y) with explicit true and
/// estimated probabilities. Masses sum to one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleDistribution {
    atoms: Vec<OracleAtom>,
}

impl OracleDistribution {
    pub fn new(atoms: Vec<OracleAtom>) -> Result<Self, SyntheticError> {
        if atoms.is_empty() {
            return Err(SyntheticError::EmptyOracle);
        }
        for (index, a) in atoms.iter().enumerate() {
            let ok = (0.0..=1.0).contains(&a.mass)
                && (0.0..=1.0).contains(&a.true_prob)
                && (0.0..=1.0).contains(&a.score);
            if !ok {
                return Err(SyntheticError::AtomOutOfRange { index });
            }
        }
        let sum: f64 = atoms.iter().map(|a| a.mass).sum();
        if (sum - 1.0).abs() > 1e-12 {
            return Err(SyntheticError::MassNotNormalized { sum });
        }
        Ok(Self { atoms })
    }

    pub fn atoms(&self) -> &[OracleAtom] {
        &self.atoms
    }

    /// Atom indices grouped by score level, levels in increasing score
    /// order.
    pub fn levels(&self) -> Vec<Vec<usize>> {
        let mut order: Vec<usize> = (0..self.atoms.len()).collect();
        order.sort_by(|&a, &b| self.atoms[a].score.total_cmp(&self.atoms[b].score));
        let mut levels: Vec<Vec<usize>> = Vec::new();
        for i in order {
            match levels.last_mut() {
                Some(level) if self.atoms[level[0]].score == self.atoms[i].score => level.push(i),
                _ => levels.push(vec![i]),
            }
        }
        levels
    }

    /// New oracle with every score transformed; the transform must stay in
    /// `[0, 1]`.
    pub fn map_scores<F: Fn(f64) -> f64>(&self, f: F) -> Result<Self, SyntheticError> {
        let atoms = self
            .atoms
            .iter()
            .map(|a| OracleAtom {
                score: f(a.score),
                ..*a
            })
            .collect();
        Self::new(atoms)
    }
}

/// Closed-form per-level statistics at a threshold: calibration value `c`,
/// grouping loss `gl` (the within-level variance of the true probability),
/// the share `w` of mass with `fstar >= t`, and the conditional means on
/// each side.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LevelStats {
    pub score: f64,
    pub mass: f64,
    pub c: f64,
    pub gl: f64,
    pub w: f64,
    pub c_plus: Option<f64>,
    pub c_minus: Option<f64>,
}

pub fn exact_stats(o: &OracleDistribution, t_star: f64) -> Vec<LevelStats> {
    o.levels()
        .iter()
        .map(|level| {
            let atoms: Vec<&OracleAtom> = level.iter().map(|&i| &o.atoms()[i]).collect();
            let mass: f64 = atoms.iter().map(|a| a.mass).sum();
            let c = atoms.iter().map(|a| a.mass * a.true_prob).sum::<f64>() / mass;
            let gl = atoms
                .iter()
                .map(|a| a.mass * (a.true_prob - c) * (a.true_prob - c))
                .sum::<f64>()
                / mass;
            let mass_plus: f64 = atoms
                .iter()
                .filter(|a| a.true_prob >= t_star)
                .map(|a| a.mass)
                .sum();
            let w = mass_plus / mass;
            let c_plus = (mass_plus > 0.0).then(|| {
                atoms
                    .iter()
                    .filter(|a| a.true_prob >= t_star)
                    .map(|a| a.mass * a.true_prob)
                    .sum::<f64>()
                    / mass_plus
            });
            let mass_minus = mass - mass_plus;
            let c_minus = (mass_minus > 0.0).then(|| {
                atoms
                    .iter()
                    .filter(|a| a.true_prob < t_star)
                    .map(|a| a.mass * a.true_prob)
                    .sum::<f64>()
                    / mass_minus
            });
            LevelStats {
                score: atoms[0].score,
                mass,
                c,
                gl,
                w,
                c_plus,
                c_minus,
            }
        })
        .collect()
}

/// Per-level exact regrets of the rule `1{score >= t}`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LevelRegrets {
    pub score: f64,
    pub mass: f64,
    pub c: f64,
    pub gl: f64,
    pub rcl: f64,
    pub rgl: f64,
    pub r: f64,
}

/// Exact regrets and the expected utilities of the three canonical rules:
/// naive (threshold the score at `t`), recalibrated (threshold the level's
/// calibration value at `t*`), and oracle (threshold the true probability
/// at `t*`).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExactRegrets {
    pub levels: Vec<LevelRegrets>,
    pub rcl: f64,
    pub rgl: f64,
    pub r: f64,
    pub eu_naive: f64,
    pub eu_recalibrated: f64,
    pub eu_oracle: f64,
}

/// Closed-form regrets: the calibration part pays `UΔ|c - t*|` where the
/// naive and recalibrated decisions disagree; the grouping part is
/// `UΔ(w(c+ - t*) - 1{c >= t*}(c - t*))` whenever both sides of the
/// threshold carry mass, and zero otherwise.
pub fn exact_regrets(o: &OracleDistribution, u: &UtilityMatrix, t: f64) -> ExactRegrets {
    let t_star = u.t_star();
    let u_delta = u.u_delta();
    let stats = exact_stats(o, t_star);

    let mut levels = Vec::with_capacity(stats.len());
    let (mut rcl, mut rgl) = (0.0, 0.0);
    for s in &stats {
        let naive = s.score >= t;
        let recal = s.c >= t_star;
        let level_rcl = if naive != recal {
            u_delta * (s.c - t_star).abs()
        } else {
            0.0
        };
        let level_rgl = if s.w > 0.0 && s.w < 1.0 {
            let c_plus = s.c_plus.expect("w > 0 implies a defined c_plus");
            let recal_term = if recal { s.c - t_star } else { 0.0 };
            u_delta * (s.w * (c_plus - t_star) - recal_term)
        } else {
            0.0
        };
        rcl += s.mass * level_rcl;
        rgl += s.mass * level_rgl;
        levels.push(LevelRegrets {
            score: s.score,
            mass: s.mass,
            c: s.c,
            gl: s.gl,
            rcl: level_rcl,
            rgl: level_rgl,
            r: level_rcl + level_rgl,
        });
    }

    let mut eu_naive = 0.0;
    let mut eu_recalibrated = 0.0;
    let mut eu_oracle = 0.0;
    for (level, stat) in o.levels().iter().zip(&stats) {
        let recal = stat.c >= t_star;
        for &i in level {
            let a = &o.atoms()[i];
            eu_naive += a.mass * pointwise_eu(a.true_prob, u, a.score >= t);
            eu_recalibrated += a.mass * pointwise_eu(a.true_prob, u, recal);
            eu_oracle += a.mass * pointwise_eu(a.true_prob, u, a.true_prob >= t_star);
        }
    }

    ExactRegrets {
        levels,
        rcl,
        rgl,
        r: rcl + rgl,
        eu_naive,
        eu_recalibrated,
        eu_oracle,
    }
}

/// Expected utility of an arbitrary per-atom decision vector.
pub fn eu_of_decisions(o: &OracleDistribution, u: &UtilityMatrix, decisions: &[bool]) -> f64 {
    assert_eq!(decisions.len(), o.atoms().len());
    o.atoms()
        .iter()
        .zip(decisions)
        .map(|(a, &d)| a.mass * pointwise_eu(a.true_prob, u, d))
        .sum()
}

/// Per-atom corrected probabilities for a feature-space partition given by
/// `groups` (one group label per atom): each atom maps to the mass-weighted
/// mean true probability of its (score level, group) cell.
pub fn exact_glar_probs(o: &OracleDistribution, groups: &[usize]) -> Vec<f64> {
    assert_eq!(groups.len(), o.atoms().len());
    let mut out = vec![0.0; o.atoms().len()];
    for level in o.levels() {
        // Cells within the level, keyed by group label.
        let mut cells: Vec<(usize, f64, f64)> = Vec::new(); // (group, Σ z·f*, Σ z)
        for &i in &level {
            let g = groups[i];
            let a = &o.atoms()[i];
            match cells.iter_mut().find(|(cg, _, _)| *cg == g) {
                Some((_, num, den)) => {
                    *num += a.mass * a.true_prob;
                    *den += a.mass;
                }
                None => cells.push((g, a.mass * a.true_prob, a.mass)),
            }
        }
        for &i in &level {
            let (_, num, den) = cells
                .iter()
                .find(|(cg, _, _)| *cg == groups[i])
                .expect("cell exists");
            out[i] = if *den > 0.0 { num / den } else { o.atoms()[i].true_prob };
        }
    }
    out
}

/// `E[Var(values | keys)]` over the atom masses, grouping keys by exact
/// equality. With `keys` = scores and `values` = true probabilities this is
/// the overall grouping loss.
pub fn expected_conditional_variance(
    o: &OracleDistribution,
    keys: &[f64],
    values: &[f64],
) -> f64 {
    assert_eq!(keys.len(), o.atoms().len());
    assert_eq!(values.len(), o.atoms().len());
    let mut order: Vec<usize> = (0..keys.len()).collect();
    order.sort_by(|&a, &b| keys[a].total_cmp(&keys[b]));
    let mut total = 0.0;
    let mut start = 0;
    while start < order.len() {
        let mut end = start;
        while end < order.len() && keys[order[end]] == keys[order[start]] {
            end += 1;
        }
        let group = &order[start..end];
        let mass: f64 = group.iter().map(|&i| o.atoms()[i].mass).sum();
        if mass > 0.0 {
            let mean =
                group.iter().map(|&i| o.atoms()[i].mass * values[i]).sum::<f64>() / mass;
            let var = group
                .iter()
                .map(|&i| o.atoms()[i].mass * (values[i] - mean) * (values[i] - mean))
                .sum::<f64>()
                / mass;
            total += mass * var;
        }
        start = end;
    }
    total
}

/// Overall grouping loss `E[Var(fstar | score)]`.
pub fn exact_gl(o: &OracleDistribution) -> f64 {
    let scores: Vec<f64> = o.atoms().iter().map(|a| a.score).collect();
    let fstars: Vec<f64> = o.atoms().iter().map(|a| a.true_prob).collect();
    expected_conditional_variance(o, &scores, &fstars)
}

/// Target mean, variance and threshold for an extremal construction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TightnessSpec {
    pub c: f64,
    pub v: f64,
    pub t: f64,
}

impl TightnessSpec {
    fn check(&self) -> Result<(), SyntheticError> {
        if !(0.0..=1.0).contains(&self.c) {
            return Err(SyntheticError::InadmissibleSpec {
                reason: "mean outside [0, 1]",
            });
        }
        if !(self.t > 0.0 && self.t < 1.0) {
            return Err(SyntheticError::InadmissibleSpec {
                reason: "threshold must lie strictly inside (0, 1)",
            });
        }
        if self.v < -1e-15 || self.v > self.c * (1.0 - self.c) + 1e-12 {
            return Err(SyntheticError::InadmissibleSpec {
                reason: "variance outside [0, c(1-c)]",
            });
        }
        Ok(())
    }
}

fn atoms_at_level(score: f64, placed: &[(f64, f64)]) -> Result<OracleDistribution, SyntheticError> {
    let atoms: Vec<OracleAtom> = placed
        .iter()
        .enumerate()
        .map(|(i, &(weight, position))| OracleAtom {
            mass: weight,
            true_prob: position,
            score,
            tag: i as u64,
        })
        .collect();
    OracleDistribution::new(atoms)
}

fn checked_weight(w: f64) -> Result<f64, SyntheticError> {
    if w < -1e-9 {
        return Err(SyntheticError::InadmissibleSpec {
            reason: "construction produced a negative weight",
        });
    }
    Ok(w.clamp(0.0, 1.0))
}

/// Distribution of true probabilities with the given mean and variance whose
/// grouping regret exactly equals the lower bound `UΔ·[v - v_min]+`.
///
/// Diracs sit on `{0, c, t}` or `{t, c, 1}` when the variance is below
/// `v_min` (zero regret), and on `{0, t, 1}` above it. The single score
/// level is placed at `c`, so the construction carries no calibration
/// regret at the matching threshold.
pub fn build_lb_tight(spec: &TightnessSpec) -> Result<OracleDistribution, SyntheticError> {
    spec.check()?;
    let TightnessSpec { c, v, t } = *spec;
    let vmin = if c < t { c * (t - c) } else { (1.0 - c) * (c - t) };

    let placed: Vec<(f64, f64)> = if v < vmin {
        // vmin > 0 here, so the ratio is well defined.
        let ratio = v / vmin;
        let wc = checked_weight(1.0 - ratio)?;
        if c < t {
            let wt = checked_weight(c / t * ratio)?;
            let w0 = checked_weight(1.0 - wc - wt)?;
            vec![(w0, 0.0), (wc, c), (wt, t)]
        } else {
            let w1 = checked_weight((c - t) / (1.0 - t) * ratio)?;
            let wt = checked_weight(1.0 - wc - w1)?;
            vec![(wt, t), (wc, c), (w1, 1.0)]
        }
    } else if c < t {
        let w1 = checked_weight((v - vmin) / (1.0 - t))?;
        let wt = checked_weight((c - w1) / t)?;
        let w0 = checked_weight(1.0 - wt - w1)?;
        vec![(w0, 0.0), (wt, t), (w1, 1.0)]
    } else {
        let w0 = checked_weight((v - vmin) / t)?;
        let wt = checked_weight((1.0 - c - w0) / (1.0 - t))?;
        let w1 = checked_weight(1.0 - wt - w0)?;
        vec![(w0, 0.0), (wt, t), (w1, 1.0)]
    };
    atoms_at_level(c, &placed)
}

/// Two-dirac distribution with the given mean and variance whose grouping
/// regret exactly equals the upper bound `(UΔ/2)(√(v + (c-t)²) - |c-t|)`.
/// Only proven in range for `t = 1/2`; other thresholds are rejected.
pub fn build_ub_tight(spec: &TightnessSpec) -> Result<OracleDistribution, SyntheticError> {
    spec.check()?;
    let TightnessSpec { c, v, t } = *spec;
    if t != 0.5 {
        return Err(SyntheticError::UnsupportedThreshold { t });
    }
    if v <= 1e-15 {
        return atoms_at_level(c, &[(1.0, c)]);
    }
    let d = c - t;
    let w = 0.5 * (1.0 - math::sqrt(d * d / (d * d + v)));
    // The dirac across the threshold carries the small weight w.
    let placed = if c >= t {
        let lo = c - math::sqrt(v * (1.0 - w) / w);
        let hi = c + math::sqrt(v * w / (1.0 - w));
        vec![(w, clamp_unit(lo)?), (1.0 - w, clamp_unit(hi)?)]
    } else {
        let lo = c - math::sqrt(v * w / (1.0 - w));
        let hi = c + math::sqrt(v * (1.0 - w) / w);
        vec![(1.0 - w, clamp_unit(lo)?), (w, clamp_unit(hi)?)]
    };
    atoms_at_level(c, &placed)
}

fn clamp_unit(x: f64) -> Result<f64, SyntheticError> {
    if !(-1e-9..=1.0 + 1e-9).contains(&x) {
        return Err(SyntheticError::InadmissibleSpec {
            reason: "dirac position escaped [0, 1]",
        });
    }
    Ok(x.clamp(0.0, 1.0))
}

pub const BRUTE_FORCE_LEVEL_CAP: usize = 20;

/// Enumerate all `2^k` decision rules constant on score levels and return
/// the best expected utility with the achieving rule (decisions aligned to
/// levels in increasing score order).
pub fn brute_force_best_rule(
    o: &OracleDistribution,
    u: &UtilityMatrix,
) -> Result<(f64, Vec<bool>), SyntheticError> {
    let levels = o.levels();
    let k = levels.len();
    if k > BRUTE_FORCE_LEVEL_CAP {
        return Err(SyntheticError::TooManyLevels {
            levels: k,
            max: BRUTE_FORCE_LEVEL_CAP,
        });
    }
    // EU(rule) = base + UΔ Σ_{level on} gain(level).
    let t_star = u.t_star();
    let base: f64 = o
        .atoms()
        .iter()
        .map(|a| a.mass * (a.true_prob * u.u01() + (1.0 - a.true_prob) * u.u00()))
        .sum();
    let gains: Vec<f64> = levels
        .iter()
        .map(|level| {
            level
                .iter()
                .map(|&i| {
                    let a = &o.atoms()[i];
                    a.mass * (a.true_prob - t_star)
                })
                .sum::<f64>()
        })
        .collect();

    let mut best_eu = f64::NEG_INFINITY;
    let mut best_mask = 0u32;
    for mask in 0..(1u32 << k) {
        let mut eu = base;
        for (j, g) in gains.iter().enumerate() {
            if (mask >> j) & 1 == 1 {
                eu += u.u_delta() * g;
            }
        }
        if eu > best_eu {
            best_eu = eu;
            best_mask = mask;
        }
    }
    let rule = (0..k).map(|j| (best_mask >> j) & 1 == 1).collect();
    Ok((best_eu, rule))
}

/// I.i.d. draws: atom by mass, label Bernoulli(fstar), score `f`, and the
/// atom tag as a 1-D feature.
pub fn sample(
    o: &OracleDistribution,
    n: usize,
    seed: u64,
) -> Result<ScoredDataset, SyntheticError> {
    if n == 0 {
        return Err(SyntheticError::InvalidSampleCount);
    }
    let mut rng = SplitMix64::new(seed);
    let cumulative: Vec<f64> = o
        .atoms()
        .iter()
        .scan(0.0, |acc, a| {
            *acc += a.mass;
            Some(*acc)
        })
        .collect();
    let samples: Vec<ScoredSample> = (0..n)
        .map(|_| {
            let mut pick = rng.next_f64();
            // Guard against cumulative rounding at the top end.
            if pick >= *cumulative.last().unwrap() {
                pick = *cumulative.last().unwrap() - f64::EPSILON;
            }
            let idx = cumulative.partition_point(|&cdf| cdf <= pick);
            let atom = &o.atoms()[idx.min(o.atoms().len() - 1)];
            ScoredSample::with_features(
                atom.score,
                rng.bernoulli(atom.true_prob),
                vec![atom.tag as f64],
            )
        })
        .collect();
    Ok(ScoredDataset::new(samples).expect("atoms are validated"))
}

/// Unstructured random oracle for property tests: distinct score levels,
/// uniform true probabilities, random masses.
pub fn random_oracle(seed: u64, n_levels: usize, atoms_per_level: usize) -> OracleDistribution {
    random_oracle_with(&OracleConfig {
        seed,
        n_levels,
        atoms_per_level,
        miscalibration: 1.0,
        spread: 1.0,
        monotone_curve: false,
    })
}

/// Knobs for the structured generator used in sweep experiments.
/// `miscalibration` scales how far scores sit from the level's mean true
/// probability; `spread` scales the within-level dispersion of the true
/// probabilities (the grouping loss). With `monotone_curve`, scores are
/// re-paired with level means rank to rank, giving a nondecreasing
/// calibration curve; that is the regime where a monotone recalibration
/// map can actually remove the calibration regret. Tags are assigned by
/// increasing true probability so that a monotone model over the tag
/// feature can represent the oracle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OracleConfig {
    pub seed: u64,
    pub n_levels: usize,
    pub atoms_per_level: usize,
    pub miscalibration: f64,
    pub spread: f64,
    #[serde(default)]
    pub monotone_curve: bool,
}

pub fn random_oracle_with(cfg: &OracleConfig) -> OracleDistribution {
    assert!(cfg.n_levels >= 1 && cfg.atoms_per_level >= 1);
    let mut rng = SplitMix64::new(cfg.seed);
    let mut scores: Vec<f64> = Vec::with_capacity(cfg.n_levels);
    // One entry per level: (score slot, atoms as (weight, fstar)).
    let mut levels: Vec<(f64, Vec<(f64, f64)>)> = Vec::new();
    for _ in 0..cfg.n_levels {
        let center = rng.range_f64(0.05, 0.95);
        let score = loop {
            let shift = cfg.miscalibration * rng.range_f64(-0.45, 0.45);
            let s = (center + shift).clamp(0.005, 0.995);
            if !scores.contains(&s) {
                break s;
            }
        };
        scores.push(score);
        let atoms: Vec<(f64, f64)> = (0..cfg.atoms_per_level)
            .map(|_| {
                let jitter = cfg.spread * rng.range_f64(-0.5, 0.5);
                let fstar = (center + jitter).clamp(0.0, 1.0);
                (rng.range_f64(0.2, 1.0), fstar)
            })
            .collect();
        levels.push((score, atoms));
    }

    if cfg.monotone_curve {
        // Pair sorted scores with levels sorted by mean true probability.
        let mut sorted_scores = scores.clone();
        sorted_scores.sort_by(f64::total_cmp);
        levels.sort_by(|a, b| {
            let mean = |atoms: &Vec<(f64, f64)>| {
                let w: f64 = atoms.iter().map(|a| a.0).sum();
                atoms.iter().map(|a| a.0 * a.1).sum::<f64>() / w
            };
            mean(&a.1).total_cmp(&mean(&b.1))
        });
        for (level, s) in levels.iter_mut().zip(&sorted_scores) {
            level.0 = *s;
        }
    }

    let mut raw: Vec<(f64, f64, f64)> = Vec::new(); // (weight, fstar, score)
    for (score, atoms) in &levels {
        for &(weight, fstar) in atoms {
            raw.push((weight, fstar, *score));
        }
    }
    let total: f64 = raw.iter().map(|r| r.0).sum();
    let mut by_fstar: Vec<usize> = (0..raw.len()).collect();
    by_fstar.sort_by(|&a, &b| raw[a].1.total_cmp(&raw[b].1));
    let mut tags = vec![0u64; raw.len()];
    for (rank, &i) in by_fstar.iter().enumerate() {
        tags[i] = rank as u64;
    }
    let atoms: Vec<OracleAtom> = raw
        .iter()
        .zip(&tags)
        .map(|(&(weight, fstar, score), &tag)| OracleAtom {
            mass: weight / total,
            true_prob: fstar,
            score,
            tag,
        })
        .collect();
    OracleDistribution::new(atoms).expect("generated atoms are valid")
}
