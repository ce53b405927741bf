//! Acceptance suite for the exact-oracle guarantees: bound sandwich and
//! tightness, optimality of the recalibrated rule, regret decomposition and
//! ranking, threshold duality, GLAR identities, estimator consistency, and
//! oracle equivalence of PAVA and AUC.
//!
//! Each test prints one `PASS: ...` line; run with `--nocapture` to see
//! them alongside the harness output.

use std::time::Instant;

use regretcal_core::binning::{estimate_calibration_curve, EqualMassBinning};
use regretcal_core::dataset::{split, ScoredDataset, SplitParts, SplitSpec};
use regretcal_core::decision::{pointwise_eu, UtilityMatrix};
use regretcal_core::grouping::{estimate_gl, fit_partition, PartitionConfig, RegionPartition};
use regretcal_core::metrics;
use regretcal_core::recalibration::{adjust_threshold, pava, StepMap};
use regretcal_core::regret::{self, regret_report};
use regretcal_core::rng::SplitMix64;
use regretcal_core::synthetic::{
    build_lb_tight, build_ub_tight, brute_force_best_rule, eu_of_decisions, exact_gl,
    exact_glar_probs, exact_regrets, exact_stats, expected_conditional_variance, random_oracle,
    sample, OracleAtom, OracleDistribution, TightnessSpec,
};

const T_STAR_GRID: [f64; 11] = [
    0.01, 0.025, 0.05, 0.1, 0.25, 0.5, 0.75, 0.9, 0.95, 0.975, 0.99,
];

/// Utility matrix with optimal threshold `t_star`, rescaled by `scale` so
/// the regret magnitude varies across checks.
fn scaled_utility(t_star: f64, scale: f64) -> UtilityMatrix {
    let base = UtilityMatrix::from_t_star(t_star).unwrap();
    UtilityMatrix::new(
        scale * base.u00(),
        scale * base.u01(),
        scale * base.u10(),
        scale * base.u11(),
    )
    .unwrap()
}

#[test]
fn criterion_01_bound_sandwich_on_random_oracles() {
    let started = Instant::now();
    let mut rng = SplitMix64::new(0xC1);
    let mut checked_levels = 0usize;
    for seed in 0..600u64 {
        let n_levels = 3 + (seed % 6) as usize;
        let atoms_per_level = 1 + (seed % 5) as usize;
        let oracle = random_oracle(seed, n_levels, atoms_per_level);
        let t_star = rng.range_f64(0.05, 0.95);
        let u = scaled_utility(t_star, rng.range_f64(0.1, 10.0));
        let u_delta = u.u_delta();
        let stats = exact_stats(&oracle, u.t_star());
        let regrets = exact_regrets(&oracle, &u, u.t_star());
        for (stat, level) in stats.iter().zip(&regrets.levels) {
            let lower = regret::lgl_bin(stat.c, stat.gl, u.t_star(), u_delta);
            let upper = regret::ugl_bin(stat.c, stat.gl, u.t_star(), u_delta);
            assert!(
                lower - 1e-9 <= level.rgl && level.rgl <= upper + 1e-9,
                "seed {seed}: L = {lower}, R = {}, U = {upper}",
                level.rgl
            );
            // Bhatia-Davis: the within-level variance never exceeds c(1-c).
            assert!(stat.gl <= regret::v_max(stat.c) + 1e-12);
            checked_levels += 1;
        }
    }
    let elapsed = started.elapsed();
    assert!(elapsed.as_secs_f64() < 10.0, "took {elapsed:?}");
    println!(
        "PASS: criterion 1 — bound sandwich on 600 random oracles ({checked_levels} levels, {:?})",
        elapsed
    );
}

#[test]
fn criterion_02_tightness_attainment() {
    let started = Instant::now();
    // Lower bound: all four construction cases across (c, v, t).
    let mut seen = [false; 4];
    for &t in &[0.3, 0.5, 0.7] {
        let u = UtilityMatrix::from_t_star(t).unwrap();
        for k in 1..10 {
            let c = k as f64 / 10.0;
            let v_min = if c < t { c * (t - c) } else { (1.0 - c) * (c - t) };
            let v_adm = c * (1.0 - c);
            for &v in &[
                0.25 * v_min,
                0.75 * v_min,
                v_min + 0.3 * (v_adm - v_min),
                v_adm,
            ] {
                let spec = TightnessSpec { c, v, t };
                let oracle = build_lb_tight(&spec).unwrap();
                let stat = &exact_stats(&oracle, t)[0];
                assert!((stat.c - c).abs() < 1e-12, "mean {} vs {c}", stat.c);
                assert!((stat.gl - v).abs() < 1e-12, "variance {} vs {v}", stat.gl);
                let regrets = exact_regrets(&oracle, &u, t);
                let bound = regret::lgl_bin(c, v, t, u.u_delta());
                assert!(
                    (regrets.rgl - bound).abs() < 1e-9,
                    "c={c} v={v} t={t}: rgl {} vs lower bound {bound}",
                    regrets.rgl
                );
                seen[(usize::from(c >= t) << 1) | usize::from(v >= v_min)] = true;
            }
        }
    }
    assert_eq!(seen, [true; 4], "all four lower-bound cases visited");

    // Upper bound: both sides of the threshold at t = 1/2.
    let t = 0.5;
    let u = UtilityMatrix::from_t_star(t).unwrap();
    let mut sides = [false; 2];
    for k in 1..10 {
        let c = k as f64 / 10.0;
        let v_adm = c * (1.0 - c);
        for &v in &[0.0, 0.1 * v_adm, 0.5 * v_adm, v_adm] {
            let spec = TightnessSpec { c, v, t };
            let oracle = build_ub_tight(&spec).unwrap();
            let stat = &exact_stats(&oracle, t)[0];
            assert!((stat.c - c).abs() < 1e-12);
            assert!((stat.gl - v).abs() < 1e-12);
            let regrets = exact_regrets(&oracle, &u, t);
            let bound = regret::ugl_bin(c, v, t, u.u_delta());
            assert!(
                (regrets.rgl - bound).abs() < 1e-9,
                "c={c} v={v}: rgl {} vs upper bound {bound}",
                regrets.rgl
            );
            sides[usize::from(c >= t)] = true;
        }
    }
    assert_eq!(sides, [true; 2], "both upper-bound cases visited");

    let elapsed = started.elapsed();
    assert!(elapsed.as_secs_f64() < 5.0, "took {elapsed:?}");
    println!("PASS: criterion 2 — tightness attainment on the (c, v) grid ({elapsed:?})");
}

#[test]
fn criterion_03_recalibrated_rule_is_optimal_over_level_sets() {
    let mut rng = SplitMix64::new(0xC3);
    for seed in 0..200u64 {
        let n_levels = 1 + (seed % 12) as usize;
        let atoms_per_level = 1 + (seed % 4) as usize;
        let oracle = random_oracle(seed.wrapping_add(10_000), n_levels, atoms_per_level);
        let t_star = rng.range_f64(0.05, 0.95);
        let u = UtilityMatrix::from_t_star(t_star).unwrap();
        let (best, _) = brute_force_best_rule(&oracle, &u).unwrap();
        let regrets = exact_regrets(&oracle, &u, t_star);
        assert!(
            best <= regrets.eu_recalibrated + 1e-9,
            "seed {seed}: enumeration found {best}, recalibrated rule {}",
            regrets.eu_recalibrated
        );
        // The recalibrated rule is itself a level-set rule, so equality.
        assert!(
            (best - regrets.eu_recalibrated).abs() <= 1e-9,
            "seed {seed}: gap {}",
            best - regrets.eu_recalibrated
        );
    }
    println!("PASS: criterion 3 — enumeration never beats the recalibrated rule (200 oracles)");
}

/// Per-level and overall decomposition plus the utility ranking, all
/// computed twice: closed forms vs direct expectations.
fn check_decomposition_and_ranking(oracle: &OracleDistribution, u: &UtilityMatrix, t: f64) {
    let t_star = u.t_star();
    let regrets = exact_regrets(oracle, u, t);
    let stats = exact_stats(oracle, t_star);
    for ((level_indices, level), stat) in oracle
        .levels()
        .iter()
        .zip(&regrets.levels)
        .zip(&stats)
    {
        let mut eu_naive = 0.0;
        let mut eu_recal = 0.0;
        let mut eu_oracle = 0.0;
        for &i in level_indices {
            let a = &oracle.atoms()[i];
            let share = a.mass / stat.mass;
            eu_naive += share * pointwise_eu(a.true_prob, u, a.score >= t);
            eu_recal += share * pointwise_eu(a.true_prob, u, stat.c >= t_star);
            eu_oracle += share * pointwise_eu(a.true_prob, u, a.true_prob >= t_star);
        }
        assert!((level.rcl - (eu_recal - eu_naive)).abs() < 1e-12);
        assert!((level.rgl - (eu_oracle - eu_recal)).abs() < 1e-12);
        assert!((level.r - (level.rcl + level.rgl)).abs() < 1e-12);
        assert!((level.r - (eu_oracle - eu_naive)).abs() < 1e-12);
    }
    // Overall decomposition and ranking.
    assert!((regrets.rcl - (regrets.eu_recalibrated - regrets.eu_naive)).abs() < 1e-12);
    assert!((regrets.rgl - (regrets.eu_oracle - regrets.eu_recalibrated)).abs() < 1e-12);
    assert!(regrets.eu_naive <= regrets.eu_recalibrated + 1e-12);
    assert!(regrets.eu_recalibrated <= regrets.eu_oracle + 1e-12);
}

#[test]
fn criterion_04_decomposition_and_ranking_exact() {
    let mut rng = SplitMix64::new(0xC4);
    for seed in 0..600u64 {
        let oracle = random_oracle(seed, 3 + (seed % 6) as usize, 1 + (seed % 5) as usize);
        let t_star = rng.range_f64(0.05, 0.95);
        let t = rng.next_f64();
        let u = scaled_utility(t_star, rng.range_f64(0.1, 10.0));
        check_decomposition_and_ranking(&oracle, &u, t);
        check_decomposition_and_ranking(&oracle, &u, t_star);
    }
    // Tightness constructions are oracles too.
    for &t in &[0.3, 0.5, 0.7] {
        let u = UtilityMatrix::from_t_star(t).unwrap();
        for k in 1..10 {
            let c = k as f64 / 10.0;
            let v = 0.8 * c * (1.0 - c);
            let oracle = build_lb_tight(&TightnessSpec { c, v, t }).unwrap();
            check_decomposition_and_ranking(&oracle, &u, t);
        }
    }
    println!("PASS: criterion 4 — regret decomposition and utility ranking exact at 1e-12");
}

/// Oracle whose exact calibration curve is nondecreasing in the score.
fn monotone_curve_oracle(seed: u64, n_levels: usize) -> (OracleDistribution, Vec<f64>, Vec<f64>) {
    let mut rng = SplitMix64::new(seed);
    let mut scores: Vec<f64> = (0..n_levels)
        .map(|_| rng.range_f64(0.02, 0.98))
        .collect();
    scores.sort_by(f64::total_cmp);
    scores.dedup();
    let mut curve: Vec<f64> = (0..scores.len()).map(|_| rng.next_f64()).collect();
    curve.sort_by(f64::total_cmp);
    let mut atoms = Vec::new();
    let mut weights: Vec<f64> = (0..scores.len()).map(|_| rng.range_f64(0.2, 1.0)).collect();
    let total: f64 = weights.iter().sum();
    for w in &mut weights {
        *w /= total;
    }
    for (i, (&score, &c)) in scores.iter().zip(&curve).enumerate() {
        let d = rng.next_f64() * c.min(1.0 - c);
        atoms.push(OracleAtom {
            mass: weights[i] / 2.0,
            true_prob: c - d,
            score,
            tag: (2 * i) as u64,
        });
        atoms.push(OracleAtom {
            mass: weights[i] / 2.0,
            true_prob: c + d,
            score,
            tag: (2 * i + 1) as u64,
        });
    }
    (
        OracleDistribution::new(atoms).unwrap(),
        scores,
        curve,
    )
}

#[test]
fn criterion_05_threshold_adjustment_duality() {
    for seed in 0..100u64 {
        let (oracle, knots, values) = monotone_curve_oracle(seed, 3 + (seed % 8) as usize);
        let curve = StepMap::new(knots, values).unwrap();
        let stats = exact_stats(&oracle, 0.5);
        for &t_star in &T_STAR_GRID {
            let t_f = adjust_threshold(&curve, t_star).unwrap().threshold();
            for stat in &stats {
                assert_eq!(
                    stat.score >= t_f,
                    stat.c >= t_star,
                    "seed {seed}, t* = {t_star}: level at {} with c = {}",
                    stat.score,
                    stat.c
                );
            }
        }
    }
    println!("PASS: criterion 5 — adjusted-threshold and recalibrated decisions agree (100 oracles x 11 thresholds)");
}

#[test]
fn criterion_05b_exact_recalibration_kills_calibration_regret() {
    for seed in 0..50u64 {
        let (oracle, knots, values) = monotone_curve_oracle(seed.wrapping_add(500), 6);
        let curve = StepMap::new(knots, values).unwrap();
        let recalibrated = oracle.map_scores(|s| curve.eval(s)).unwrap();
        for &t_star in &T_STAR_GRID {
            let u = UtilityMatrix::from_t_star(t_star).unwrap();
            let regrets = exact_regrets(&recalibrated, &u, t_star);
            assert!(
                regrets.rcl.abs() < 1e-12,
                "seed {seed}, t* = {t_star}: rcl = {}",
                regrets.rcl
            );
        }
    }
    println!("PASS: criterion 5b — recalibrating through the exact curve leaves zero calibration regret");
}

#[test]
fn criterion_06_glar_identities_and_hierarchy() {
    let mut rng = SplitMix64::new(0xC6);
    for seed in 0..60u64 {
        let oracle = random_oracle(seed.wrapping_add(777), 4 + (seed % 5) as usize, 4);
        let n = oracle.atoms().len();
        let finest: Vec<usize> = (0..n).collect();
        let coarse: Vec<usize> = (0..n).map(|i| i / 2).collect();
        let probs_fine = exact_glar_probs(&oracle, &finest);
        let probs_coarse = exact_glar_probs(&oracle, &coarse);
        let scores: Vec<f64> = oracle.atoms().iter().map(|a| a.score).collect();
        let fstars: Vec<f64> = oracle.atoms().iter().map(|a| a.true_prob).collect();

        for probs in [&probs_fine, &probs_coarse] {
            // Calibration: E[Y | corrected = q] = q, exactly.
            let mut order: Vec<usize> = (0..n).collect();
            order.sort_by(|&a, &b| probs[a].total_cmp(&probs[b]));
            let mut start = 0;
            while start < n {
                let mut end = start;
                while end < n && probs[order[end]] == probs[order[start]] {
                    end += 1;
                }
                let group = &order[start..end];
                let mass: f64 = group.iter().map(|&i| oracle.atoms()[i].mass).sum();
                let mean: f64 = group
                    .iter()
                    .map(|&i| oracle.atoms()[i].mass * fstars[i])
                    .sum::<f64>()
                    / mass;
                assert!(
                    (mean - probs[order[start]]).abs() < 1e-12,
                    "seed {seed}: E[Y | corrected] = {mean} vs {}",
                    probs[order[start]]
                );
                start = end;
            }

            // Grouping-loss reduction identity.
            let gl_before = exact_gl(&oracle);
            let gl_after = expected_conditional_variance(&oracle, probs, &fstars);
            let explained = expected_conditional_variance(&oracle, &scores, probs);
            assert!(
                (gl_before - gl_after - explained).abs() < 1e-12,
                "seed {seed}: {gl_before} - {gl_after} != {explained}"
            );
            assert!(gl_after <= gl_before + 1e-12);
        }

        // Expected-utility hierarchy for the nested partitions.
        let t_star = rng.range_f64(0.1, 0.9);
        let u = UtilityMatrix::from_t_star(t_star).unwrap();
        let regrets = exact_regrets(&oracle, &u, t_star);
        let decide = |values: &[f64]| -> Vec<bool> {
            values.iter().map(|&v| v >= t_star).collect()
        };
        let eu_coarse = eu_of_decisions(&oracle, &u, &decide(&probs_coarse));
        let eu_fine = eu_of_decisions(&oracle, &u, &decide(&probs_fine));
        let eu_oracle_rule = eu_of_decisions(&oracle, &u, &decide(&fstars));
        for &t in &[0.2, t_star, 0.8] {
            let eu_naive = eu_of_decisions(
                &oracle,
                &u,
                &oracle.atoms().iter().map(|a| a.score >= t).collect::<Vec<_>>(),
            );
            assert!(eu_naive <= regrets.eu_recalibrated + 1e-12);
        }
        assert!(regrets.eu_recalibrated <= eu_coarse + 1e-12);
        assert!(eu_coarse <= eu_fine + 1e-12);
        assert!(eu_fine <= eu_oracle_rule + 1e-12);

        // GLAT: the per-sample threshold reproduces the GLAR decision.
        for (i, atom) in oracle.atoms().iter().enumerate() {
            let t_p = t_star - (probs_fine[i] - atom.score);
            assert_eq!(atom.score >= t_p, probs_fine[i] >= t_star);
        }
    }
    println!("PASS: criterion 6 — GLAR calibration, GL reduction, hierarchy, and GLAT duality (60 oracles)");
}

/// Fixed miscalibrated oracle with a known exact calibration regret at
/// t = t* = 1/2: ten equal-mass levels, several crossing the threshold.
fn consistency_oracle() -> OracleDistribution {
    let offsets = [0.0, 0.12, -0.1, 0.17, 0.17, -0.13, 0.1, -0.17, 0.0, -0.12];
    let mut atoms = Vec::new();
    for k in 0..10usize {
        let score = 0.05 + 0.1 * k as f64;
        let c = (score + offsets[k]).clamp(0.02, 0.98);
        let d = 0.8 * c.min(1.0 - c);
        for (j, fstar) in [c - d, c + d].into_iter().enumerate() {
            atoms.push(OracleAtom {
                mass: 0.05,
                true_prob: fstar,
                score,
                tag: (2 * k + j) as u64,
            });
        }
    }
    OracleDistribution::new(atoms).unwrap()
}

#[test]
fn criterion_09_estimator_consistency() {
    let started = Instant::now();
    let oracle = consistency_oracle();
    let u = UtilityMatrix::from_t_star(0.5).unwrap();
    let exact = exact_regrets(&oracle, &u, 0.5);
    assert!(exact.rcl > 0.02, "construction should carry visible regret");

    let mut hits = 0;
    for seed in 0..50u64 {
        let ds = sample(&oracle, 20_000, seed).unwrap();
        let binning = EqualMassBinning::fit(&ds.scores(), 15).unwrap();
        let curve = estimate_calibration_curve(&ds, &binning).unwrap();
        let gl = estimate_gl(&ds, &binning, &RegionPartition::trivial(&binning)).unwrap();
        let report = regret_report(&ds, &gl, &curve, &u, 0.5).unwrap();
        if (report.rcl_hat - exact.rcl).abs() <= 0.02 {
            hits += 1;
        }
    }
    assert!(
        hits >= 48,
        "calibration-regret estimator within ±0.02 in only {hits}/50 runs"
    );

    // Grouping-loss estimator on two-region oracles, honest protocol, at
    // ten thousand estimation samples per bin.
    let spreads = [0.1, 0.15, 0.2, 0.25, 0.3];
    let mut atoms = Vec::new();
    for (k, &d) in spreads.iter().enumerate() {
        let score = 0.1 + 0.2 * k as f64;
        for (j, fstar) in [0.5 - d, 0.5 + d].into_iter().enumerate() {
            atoms.push(OracleAtom {
                mass: 0.1,
                true_prob: fstar,
                score,
                tag: (2 * k + j) as u64,
            });
        }
    }
    let gl_oracle = OracleDistribution::new(atoms).unwrap();
    for seed in 0..10u64 {
        let ds = sample(&gl_oracle, 100_000, seed).unwrap();
        let parts = split(&ds, &SplitSpec::new(0.5, 0.5, seed, false)).unwrap();
        let SplitParts::Plain { fit, eval } = parts else {
            unreachable!()
        };
        let binning = EqualMassBinning::fit(&fit.scores(), 15).unwrap();
        let part = fit_partition(&fit, &binning, &PartitionConfig::default()).unwrap();
        let gl = estimate_gl(&eval, &binning, &part).unwrap();
        for (k, &d) in spreads.iter().enumerate() {
            let bin = binning.bin_index(0.1 + 0.2 * k as f64);
            let estimated = gl.bins()[bin].gl_hat.unwrap();
            assert!(
                (estimated - d * d).abs() <= 0.02,
                "seed {seed}, level {k}: gl_hat = {estimated} vs exact {}",
                d * d
            );
        }
    }
    let elapsed = started.elapsed();
    println!(
        "PASS: criterion 9 — estimator consistency ({hits}/50 calibration runs in band, grouping loss within ±0.02; {elapsed:?})"
    );
}

#[test]
fn criterion_10_pava_and_auc_match_exhaustive_oracles() {
    // Every binary sequence up to length 8 against exhaustive monotone-fit
    // search over contiguous block partitions.
    for n in 1..=8usize {
        for pattern in 0..(1u32 << n) {
            let y: Vec<f64> = (0..n)
                .map(|i| if (pattern >> i) & 1 == 1 { 1.0 } else { 0.0 })
                .collect();
            let fitted = pava(&y, &vec![1.0; n]);
            let sse: f64 = y.iter().zip(&fitted).map(|(a, b)| (a - b) * (a - b)).sum();
            let best = exhaustive_monotone_sse(&y);
            assert!(
                sse <= best + 1e-9,
                "pattern {pattern:b}: pava {sse} vs best {best}"
            );
        }
    }

    // AUC against O(n^2) pair counting with heavy ties.
    let mut rng = SplitMix64::new(0xC10);
    for _ in 0..100 {
        let n = 2 + rng.below(199) as usize;
        let mut samples = Vec::with_capacity(n);
        for _ in 0..n {
            let score = (rng.below(20) as f64) / 19.0;
            samples.push(regretcal_core::dataset::ScoredSample::new(
                score,
                rng.bernoulli(0.2 + 0.6 * score),
            ));
        }
        let ds = ScoredDataset::new(samples).unwrap();
        if ds.positive_count() == 0 || ds.positive_count() == ds.len() {
            continue;
        }
        let fast = metrics::auc(&ds).unwrap();
        let mut wins = 0.0;
        let mut pairs = 0.0;
        for p in ds.samples().iter().filter(|s| s.label) {
            for q in ds.samples().iter().filter(|s| !s.label) {
                pairs += 1.0;
                wins += if p.score > q.score {
                    1.0
                } else if p.score == q.score {
                    0.5
                } else {
                    0.0
                };
            }
        }
        assert!((fast - wins / pairs).abs() < 1e-9);
    }
    println!("PASS: criterion 10 — PAVA matches exhaustive search (n <= 8) and AUC matches pair counting (n <= 200)");
}

fn exhaustive_monotone_sse(y: &[f64]) -> f64 {
    let n = y.len();
    let mut best = f64::INFINITY;
    let masks = if n == 1 { 1u32 } else { 1u32 << (n - 1) };
    for mask in 0..masks {
        let mut sse = 0.0;
        let mut start = 0;
        let mut prev = f64::NEG_INFINITY;
        let mut feasible = true;
        for i in 0..n {
            let block_ends = i == n - 1 || (mask >> i) & 1 == 1;
            if block_ends {
                let mean: f64 = y[start..=i].iter().sum::<f64>() / (i - start + 1) as f64;
                if mean < prev {
                    feasible = false;
                    break;
                }
                prev = mean;
                sse += y[start..=i].iter().map(|v| (v - mean) * (v - mean)).sum::<f64>();
                start = i + 1;
            }
        }
        if feasible && sse < best {
            best = sse;
        }
    }
    best
}
