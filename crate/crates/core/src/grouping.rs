//! Feature-space partitions within score bins, grouping-loss estimation,
//! and grouping-loss adaptive recalibration (GLAR) with its threshold dual
//! (GLAT).
//!
//! The grouping loss at a score level is the variance of the true
//! conditional probabilities hidden inside it. It is estimated honestly: a
//! small tree is grown per bin on one fold, and region means plus the
//! debiased variance of region means are computed on a disjoint fold.

use alloc::collections::BTreeSet;
use alloc::vec;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::binning::EqualMassBinning;
use crate::dataset::{ScoredDataset, ScoredSample};
use crate::decision::{DecisionError, UtilityMatrix};
use crate::recalibration::{isotonic_fit, RecalError, StepMap};
use crate::regret;

#[derive(Debug, Error, PartialEq)]
pub enum GroupingError {
    #[error("dataset has no features")]
    NoFeatures,
    #[error("fit and estimation folds overlap on {shared} samples")]
    FoldOverlap { shared: usize },
    #[error("estimation fold puts no samples in any bin region")]
    EmptyRegion,
    #[error("binning does not match the one the partition was fitted with")]
    BinningMismatch,
    #[error("sample lacks features required by an active bin")]
    MissingFeatures,
    #[error(transparent)]
    Recalibration(#[from] RecalError),
    #[error(transparent)]
    Decision(#[from] DecisionError),
}

/// Binary split tree stored as a flat node list; leaves carry region ids.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum TreeNode {
    Leaf {
        region: usize,
    },
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

/// Axis-aligned partition of feature space for one score bin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinTree {
    nodes: Vec<TreeNode>,
    n_regions: usize,
}

impl BinTree {
    fn single_region() -> Self {
        Self {
            nodes: vec![TreeNode::Leaf { region: 0 }],
            n_regions: 1,
        }
    }

    pub fn n_regions(&self) -> usize {
        self.n_regions
    }

    /// Region id of a feature vector. Samples with `x[feature] <= threshold`
    /// go left.
    pub fn region_of(&self, features: &[f64]) -> usize {
        let mut node = 0;
        loop {
            match &self.nodes[node] {
                TreeNode::Leaf { region } => return *region,
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    node = if features[*feature] <= *threshold {
                        *left
                    } else {
                        *right
                    };
                }
            }
        }
    }
}

/// Mass and positive count of a region on the fold it was computed from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegionStat {
    pub mass: usize,
    pub positives: usize,
}

impl RegionStat {
    pub fn mean_label(&self) -> Option<f64> {
        (self.mass > 0).then(|| self.positives as f64 / self.mass as f64)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PartitionConfig {
    /// Upper bound on regions per bin.
    pub max_leaves: usize,
    /// Minimum samples per leaf on the fitting fold. Bins with fewer than
    /// twice this stay a single region.
    pub min_leaf: usize,
}

impl Default for PartitionConfig {
    fn default() -> Self {
        Self {
            max_leaves: 5,
            min_leaf: 10,
        }
    }
}

/// Per-bin trees over feature space, with fitting-fold region stats.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionPartition {
    edges: Vec<f64>,
    feature_dim: usize,
    trees: Vec<BinTree>,
    fit_stats: Vec<Vec<RegionStat>>,
    /// Origin ids of the fitting fold, used to reject overlapping folds.
    fit_origin: Option<BTreeSet<u64>>,
}

impl RegionPartition {
    pub fn trees(&self) -> &[BinTree] {
        &self.trees
    }

    pub fn fit_stats(&self) -> &[Vec<RegionStat>] {
        &self.fit_stats
    }

    pub fn edges(&self) -> &[f64] {
        &self.edges
    }

    /// One region per bin, needing no features. Grouping loss estimated
    /// against it is identically zero: no within-bin variation is
    /// expressible.
    pub fn trivial(b: &EqualMassBinning) -> Self {
        Self {
            edges: b.edges().to_vec(),
            feature_dim: 0,
            trees: vec![BinTree::single_region(); b.n_bins()],
            fit_stats: vec![vec![RegionStat {
                mass: 0,
                positives: 0,
            }]; b.n_bins()],
            fit_origin: None,
        }
    }
}

/// Greedy per-bin trees on (features, labels): repeatedly split the leaf
/// with the largest Gini impurity decrease until `max_leaves` is reached or
/// no split satisfies the minimum leaf size.
pub fn fit_partition(
    ds_fit: &ScoredDataset,
    b: &EqualMassBinning,
    cfg: &PartitionConfig,
) -> Result<RegionPartition, GroupingError> {
    if ds_fit.feature_dim() == 0 {
        return Err(GroupingError::NoFeatures);
    }
    let mut bin_members: Vec<Vec<usize>> = vec![Vec::new(); b.n_bins()];
    for (i, s) in ds_fit.samples().iter().enumerate() {
        bin_members[b.bin_index(s.score)].push(i);
    }
    let mut trees = Vec::with_capacity(b.n_bins());
    let mut fit_stats = Vec::with_capacity(b.n_bins());
    for members in &bin_members {
        let tree = if members.len() < 2 * cfg.min_leaf || cfg.max_leaves <= 1 {
            BinTree::single_region()
        } else {
            grow_tree(ds_fit, members, cfg)
        };
        let mut stats = vec![
            RegionStat {
                mass: 0,
                positives: 0
            };
            tree.n_regions()
        ];
        for &i in members {
            let s = &ds_fit.samples()[i];
            let r = tree.region_of(&s.features);
            stats[r].mass += 1;
            stats[r].positives += s.label as usize;
        }
        trees.push(tree);
        fit_stats.push(stats);
    }
    Ok(RegionPartition {
        edges: b.edges().to_vec(),
        feature_dim: ds_fit.feature_dim(),
        trees,
        fit_stats,
        fit_origin: ds_fit.origin().map(|ids| ids.iter().copied().collect()),
    })
}

struct Leaf {
    node: usize,
    members: Vec<usize>,
}

struct CandidateSplit {
    gain: f64,
    feature: usize,
    threshold: f64,
}

fn gini_sum(positives: f64, total: f64) -> f64 {
    // total * gini = total * 2p(1-p); the constant factor cancels in gains,
    // keep the conventional one anyway.
    if total == 0.0 {
        0.0
    } else {
        2.0 * positives * (total - positives) / total
    }
}

fn best_split(ds: &ScoredDataset, members: &[usize], min_leaf: usize) -> Option<CandidateSplit> {
    let total = members.len() as f64;
    let positives = members.iter().filter(|&&i| ds.samples()[i].label).count() as f64;
    let parent = gini_sum(positives, total);
    if parent == 0.0 {
        return None; // pure leaf
    }
    let mut best: Option<CandidateSplit> = None;
    let d = ds.feature_dim();
    let mut order: Vec<usize> = Vec::with_capacity(members.len());
    for feature in 0..d {
        order.clear();
        order.extend_from_slice(members);
        order.sort_by(|&a, &b| {
            ds.samples()[a].features[feature].total_cmp(&ds.samples()[b].features[feature])
        });
        let mut left_n = 0.0;
        let mut left_pos = 0.0;
        for k in 0..order.len() - 1 {
            let s = &ds.samples()[order[k]];
            left_n += 1.0;
            left_pos += s.label_value();
            let x_here = s.features[feature];
            let x_next = ds.samples()[order[k + 1]].features[feature];
            if x_here == x_next {
                continue; // cannot cut inside a tie block
            }
            if (k + 1) < min_leaf || (order.len() - k - 1) < min_leaf {
                continue;
            }
            let gain = parent
                - gini_sum(left_pos, left_n)
                - gini_sum(positives - left_pos, total - left_n);
            let threshold = 0.5 * (x_here + x_next);
            let better = match &best {
                None => gain > 1e-12,
                Some(b) => gain > b.gain + 1e-12,
            };
            if better {
                best = Some(CandidateSplit {
                    gain,
                    feature,
                    threshold,
                });
            }
        }
    }
    best
}

fn grow_tree(ds: &ScoredDataset, members: &[usize], cfg: &PartitionConfig) -> BinTree {
    let mut nodes = vec![TreeNode::Leaf { region: 0 }];
    let mut leaves = vec![Leaf {
        node: 0,
        members: members.to_vec(),
    }];
    while leaves.len() < cfg.max_leaves {
        // Pick the single best (leaf, split) pair; first leaf wins ties so
        // growth is deterministic.
        let mut chosen: Option<(usize, CandidateSplit)> = None;
        for (li, leaf) in leaves.iter().enumerate() {
            if let Some(split) = best_split(ds, &leaf.members, cfg.min_leaf) {
                let replace = match &chosen {
                    None => true,
                    Some((_, c)) => split.gain > c.gain + 1e-12,
                };
                if replace {
                    chosen = Some((li, split));
                }
            }
        }
        let Some((li, split)) = chosen else { break };
        let leaf = leaves.swap_remove(li);
        let (mut left_members, mut right_members) = (Vec::new(), Vec::new());
        for i in leaf.members {
            if ds.samples()[i].features[split.feature] <= split.threshold {
                left_members.push(i);
            } else {
                right_members.push(i);
            }
        }
        let left_node = nodes.len();
        let right_node = nodes.len() + 1;
        nodes.push(TreeNode::Leaf { region: 0 });
        nodes.push(TreeNode::Leaf { region: 0 });
        nodes[leaf.node] = TreeNode::Split {
            feature: split.feature,
            threshold: split.threshold,
            left: left_node,
            right: right_node,
        };
        leaves.push(Leaf {
            node: left_node,
            members: left_members,
        });
        leaves.push(Leaf {
            node: right_node,
            members: right_members,
        });
    }
    // Number regions left to right for a stable layout.
    let mut tree = BinTree {
        nodes,
        n_regions: 0,
    };
    let mut next = 0;
    number_regions(&mut tree.nodes, 0, &mut next);
    tree.n_regions = next;
    tree
}

fn number_regions(nodes: &mut [TreeNode], at: usize, next: &mut usize) {
    match nodes[at] {
        TreeNode::Leaf { .. } => {
            nodes[at] = TreeNode::Leaf { region: *next };
            *next += 1;
        }
        TreeNode::Split { left, right, .. } => {
            number_regions(nodes, left, next);
            number_regions(nodes, right, next);
        }
    }
}

/// Per-bin grouping-loss estimate and the estimation-fold region stats it
/// was computed from.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BinGl {
    pub mass: usize,
    pub positives: usize,
    /// Debiased, clipped to `[0, 1/4]`; `None` when the bin holds no
    /// estimation samples.
    pub gl_hat: Option<f64>,
    pub regions: Vec<RegionStat>,
    pub debiased: bool,
}

impl BinGl {
    pub fn c_hat(&self) -> Option<f64> {
        (self.mass > 0).then(|| self.positives as f64 / self.mass as f64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroupingLossEstimate {
    edges: Vec<f64>,
    bins: Vec<BinGl>,
}

impl GroupingLossEstimate {
    pub fn bins(&self) -> &[BinGl] {
        &self.bins
    }

    pub fn edges(&self) -> &[f64] {
        &self.edges
    }

    /// Mass-weighted average of the per-bin estimates.
    pub fn overall(&self) -> f64 {
        let total: usize = self.bins.iter().map(|b| b.mass).sum();
        if total == 0 {
            return 0.0;
        }
        self.bins
            .iter()
            .filter_map(|b| b.gl_hat.map(|g| g * b.mass as f64))
            .sum::<f64>()
            / total as f64
    }
}

/// Plug-in grouping-loss estimate on a fold disjoint from the partition's:
/// the weighted variance of region means around the bin mean, minus the
/// sampling variance of each region mean, clipped to `[0, 1/4]`.
pub fn estimate_gl(
    ds_estimate: &ScoredDataset,
    b: &EqualMassBinning,
    part: &RegionPartition,
) -> Result<GroupingLossEstimate, GroupingError> {
    if part.edges != b.edges() {
        return Err(GroupingError::BinningMismatch);
    }
    if part.feature_dim > 0 && ds_estimate.feature_dim() != part.feature_dim {
        return Err(GroupingError::MissingFeatures);
    }
    if let (Some(fit_ids), Some(est_ids)) = (&part.fit_origin, ds_estimate.origin()) {
        let shared = est_ids.iter().filter(|id| fit_ids.contains(id)).count();
        if shared > 0 {
            return Err(GroupingError::FoldOverlap { shared });
        }
    }

    let mut bins: Vec<BinGl> = part
        .trees
        .iter()
        .map(|t| BinGl {
            mass: 0,
            positives: 0,
            gl_hat: None,
            regions: vec![
                RegionStat {
                    mass: 0,
                    positives: 0
                };
                t.n_regions()
            ],
            debiased: true,
        })
        .collect();

    for s in ds_estimate.samples() {
        let bi = b.bin_index(s.score);
        let tree = &part.trees[bi];
        let r = if tree.n_regions() == 1 {
            0
        } else {
            tree.region_of(&s.features)
        };
        let bin = &mut bins[bi];
        bin.mass += 1;
        bin.positives += s.label as usize;
        bin.regions[r].mass += 1;
        bin.regions[r].positives += s.label as usize;
    }

    let mut any = false;
    for bin in &mut bins {
        if bin.mass == 0 {
            continue;
        }
        any = true;
        let mass = bin.mass as f64;
        let c = bin.positives as f64 / mass;
        let mut spread = 0.0;
        let mut debias = 0.0;
        for region in &bin.regions {
            // Regions the estimation fold never hits carry no weight.
            let Some(m) = region.mean_label() else {
                continue;
            };
            let share = region.mass as f64 / mass;
            spread += share * (m - c) * (m - c);
            debias += share * m * (1.0 - m) / region.mass as f64;
        }
        bin.gl_hat = Some((spread - debias).clamp(0.0, 0.25));
    }
    if !any {
        return Err(GroupingError::EmptyRegion);
    }
    Ok(GroupingLossEstimate {
        edges: part.edges.clone(),
        bins,
    })
}

/// GLAR configuration: tree shape, the regret gate `r`, and the decision
/// threshold the gate is evaluated at.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GlarConfig {
    pub partition: PartitionConfig,
    /// Corrections activate only where the estimated grouping regret
    /// exceeds this.
    pub gate: f64,
    pub t_star: f64,
}

impl GlarConfig {
    pub fn new(t_star: f64) -> Self {
        Self {
            partition: PartitionConfig::default(),
            gate: 0.02,
            t_star,
        }
    }
}

/// Lookup from (score bin, feature region) to a corrected probability, with
/// an isotonic fallback wherever the regret gate stayed closed. The
/// serialized form includes every tree split condition, so a reload
/// reproduces the map exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GlarMap {
    binning: EqualMassBinning,
    feature_dim: usize,
    trees: Vec<BinTree>,
    /// Estimation-fold region means; `None` where that fold was empty.
    region_probs: Vec<Vec<Option<f64>>>,
    bin_active: Vec<bool>,
    fallback: StepMap,
    overall_rgl: f64,
    bin_rgl: Vec<Option<f64>>,
    config: GlarConfig,
}

impl GlarMap {
    pub fn fallback(&self) -> &StepMap {
        &self.fallback
    }

    /// Whether corrections are active anywhere.
    pub fn active(&self) -> bool {
        self.bin_active.iter().any(|&a| a)
    }

    pub fn bin_active(&self) -> &[bool] {
        &self.bin_active
    }

    pub fn overall_rgl(&self) -> f64 {
        self.overall_rgl
    }
}

/// Fit GLAR on two disjoint folds: trees on `fit1`, region means and the
/// grouping regret on `fit2`, isotonic fallback on their union. Corrections
/// activate only when the overall estimated grouping regret exceeds the
/// gate, and then only in bins whose conditional estimate exceeds it too.
/// The regret scale comes from the utility family with optimal threshold
/// `t_star`.
pub fn glar_fit(
    fit1: &ScoredDataset,
    fit2: &ScoredDataset,
    b: &EqualMassBinning,
    cfg: &GlarConfig,
) -> Result<GlarMap, GroupingError> {
    let part = fit_partition(fit1, b, &cfg.partition)?;
    let gl = estimate_gl(fit2, b, &part)?;
    let u = UtilityMatrix::from_t_star(cfg.t_star)?;

    let mut bin_rgl: Vec<Option<f64>> = Vec::with_capacity(gl.bins().len());
    let mut weighted = 0.0;
    let mut total_mass = 0usize;
    for bin in gl.bins() {
        let rgl = match (bin.c_hat(), bin.gl_hat) {
            (Some(c), Some(g)) => {
                let lo = regret::lgl_bin(c, g, cfg.t_star, u.u_delta());
                let hi = regret::ugl_bin(c, g, cfg.t_star, u.u_delta());
                Some(0.5 * (lo + hi))
            }
            _ => None,
        };
        if let Some(r) = rgl {
            weighted += r * bin.mass as f64;
        }
        total_mass += bin.mass;
        bin_rgl.push(rgl);
    }
    let overall_rgl = if total_mass == 0 {
        0.0
    } else {
        weighted / total_mass as f64
    };

    let gate_open = overall_rgl > cfg.gate;
    let bin_active: Vec<bool> = bin_rgl
        .iter()
        .map(|r| gate_open && r.is_some_and(|r| r > cfg.gate))
        .collect();

    let mut scores = fit1.scores();
    scores.extend(fit2.scores());
    let mut labels = fit1.labels();
    labels.extend(fit2.labels());
    let fallback = isotonic_fit(&scores, &labels)?;

    let region_probs: Vec<Vec<Option<f64>>> = gl
        .bins()
        .iter()
        .map(|bin| bin.regions.iter().map(|r| r.mean_label()).collect())
        .collect();

    Ok(GlarMap {
        binning: b.clone(),
        feature_dim: part.feature_dim,
        trees: part.trees,
        region_probs,
        bin_active,
        fallback,
        overall_rgl,
        bin_rgl,
        config: *cfg,
    })
}

/// Corrected probability for one sample: the (bin, region) mean when that
/// bin's gate is open, otherwise the isotonic fallback of the score. Scores
/// outside the fitted bins clamp to the nearest bin.
pub fn glar_apply(map: &GlarMap, sample: &ScoredSample) -> Result<f64, GroupingError> {
    let bi = map.binning.bin_index(sample.score);
    if map.bin_active[bi] {
        let tree = &map.trees[bi];
        let region = if tree.n_regions() == 1 {
            0
        } else {
            if sample.features.len() != map.feature_dim {
                return Err(GroupingError::MissingFeatures);
            }
            tree.region_of(&sample.features)
        };
        if let Some(p) = map.region_probs[bi][region] {
            return Ok(p);
        }
        // Region unseen on the estimation fold: no local mean to trust.
    }
    Ok(map.fallback.eval(sample.score))
}

/// Per-sample threshold `t* - (corrected - score)`. Thresholding the raw
/// score at it reproduces the GLAR decision exactly:
/// `score >= t_P  <=>  corrected >= t*`.
pub fn glat_threshold(
    map: &GlarMap,
    sample: &ScoredSample,
    t_star: f64,
) -> Result<f64, GroupingError> {
    let corrected = glar_apply(map, sample)?;
    Ok(t_star - (corrected - sample.score))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{split, SplitParts, SplitSpec};
    use crate::rng::SplitMix64;

    fn two_cluster_dataset(n: usize, seed: u64) -> ScoredDataset {
        // Score constant at 0.5; the 1-D feature separates f* = 0.2 from 0.8.
        let mut rng = SplitMix64::new(seed);
        let samples: Vec<ScoredSample> = (0..n)
            .map(|_| {
                let hot = rng.bernoulli(0.5);
                let (x, p) = if hot { (1.0, 0.8) } else { (-1.0, 0.2) };
                ScoredSample::with_features(0.5, rng.bernoulli(p), vec![x])
            })
            .collect();
        ScoredDataset::new(samples).unwrap()
    }

    #[test]
    fn constant_features_give_one_region() {
        let mut rng = SplitMix64::new(1);
        let samples: Vec<ScoredSample> = (0..200)
            .map(|_| ScoredSample::with_features(rng.next_f64(), rng.bernoulli(0.5), vec![3.0]))
            .collect();
        let ds = ScoredDataset::new(samples).unwrap();
        let b = EqualMassBinning::fit(&ds.scores(), 4).unwrap();
        let part = fit_partition(&ds, &b, &PartitionConfig::default()).unwrap();
        for tree in part.trees() {
            assert_eq!(tree.n_regions(), 1);
        }
    }

    #[test]
    fn sign_split_recovers_two_regions() {
        let mut rng = SplitMix64::new(2);
        let samples: Vec<ScoredSample> = (0..400)
            .map(|_| {
                let x = rng.range_f64(-1.0, 1.0);
                ScoredSample::with_features(0.5, x >= 0.0, vec![x])
            })
            .collect();
        let ds = ScoredDataset::new(samples).unwrap();
        let b = EqualMassBinning::fit(&ds.scores(), 1).unwrap();
        let part = fit_partition(&ds, &b, &PartitionConfig::default()).unwrap();
        let tree = &part.trees()[0];
        assert_eq!(tree.n_regions(), 2);
        let lo = tree.region_of(&[-0.5]);
        let hi = tree.region_of(&[0.5]);
        assert_ne!(lo, hi);
        let stats = &part.fit_stats()[0];
        let mean_lo = stats[lo].mean_label().unwrap();
        let mean_hi = stats[hi].mean_label().unwrap();
        assert!(mean_lo < 0.05, "low region mean {mean_lo}");
        assert!(mean_hi > 0.95, "high region mean {mean_hi}");
    }

    #[test]
    fn max_leaves_one_degenerates_to_bin() {
        let ds = two_cluster_dataset(100, 3);
        let b = EqualMassBinning::fit(&ds.scores(), 1).unwrap();
        let cfg = PartitionConfig {
            max_leaves: 1,
            min_leaf: 10,
        };
        let part = fit_partition(&ds, &b, &cfg).unwrap();
        assert_eq!(part.trees()[0].n_regions(), 1);
    }

    #[test]
    fn partition_requires_features() {
        let ds = ScoredDataset::new(vec![
            ScoredSample::new(0.2, false),
            ScoredSample::new(0.8, true),
        ])
        .unwrap();
        let b = EqualMassBinning::fit(&ds.scores(), 1).unwrap();
        assert_eq!(
            fit_partition(&ds, &b, &PartitionConfig::default()).unwrap_err(),
            GroupingError::NoFeatures
        );
    }

    fn honest_folds(ds: &ScoredDataset, seed: u64) -> (ScoredDataset, ScoredDataset) {
        let spec = SplitSpec::new(0.5, 0.5, seed, false);
        match split(ds, &spec).unwrap() {
            SplitParts::Plain { fit, eval } => (fit, eval),
            _ => unreachable!(),
        }
    }

    #[test]
    fn gl_estimate_near_zero_without_within_bin_variation() {
        // f* constant within every bin: labels at rate = bin score.
        let mut rng = SplitMix64::new(4);
        let samples: Vec<ScoredSample> = (0..4000)
            .map(|_| {
                let level = if rng.bernoulli(0.5) { 0.3 } else { 0.7 };
                ScoredSample::with_features(level, rng.bernoulli(level), vec![rng.next_f64()])
            })
            .collect();
        let ds = ScoredDataset::new(samples).unwrap();
        let (fit1, fit2) = honest_folds(&ds, 9);
        let b = EqualMassBinning::fit(&fit1.scores(), 2).unwrap();
        let part = fit_partition(&fit1, &b, &PartitionConfig::default()).unwrap();
        let gl = estimate_gl(&fit2, &b, &part).unwrap();
        for bin in gl.bins() {
            if let Some(g) = bin.gl_hat {
                assert!(g < 0.01, "gl_hat = {g}");
            }
        }
    }

    #[test]
    fn gl_estimate_matches_two_point_variance() {
        // Two equal-mass regions at f* = 0.2 and 0.8: exact GL = 0.09.
        let ds = two_cluster_dataset(20_000, 5);
        let (fit1, fit2) = honest_folds(&ds, 11);
        let b = EqualMassBinning::fit(&fit1.scores(), 1).unwrap();
        let part = fit_partition(&fit1, &b, &PartitionConfig::default()).unwrap();
        let gl = estimate_gl(&fit2, &b, &part).unwrap();
        let g = gl.bins()[0].gl_hat.unwrap();
        assert!((g - 0.09).abs() < 0.02, "gl_hat = {g}");
    }

    #[test]
    fn single_region_estimates_zero_after_clipping() {
        let ds = two_cluster_dataset(400, 6);
        let (fit1, fit2) = honest_folds(&ds, 12);
        let b = EqualMassBinning::fit(&fit1.scores(), 1).unwrap();
        let cfg = PartitionConfig {
            max_leaves: 1,
            min_leaf: 10,
        };
        let part = fit_partition(&fit1, &b, &cfg).unwrap();
        let gl = estimate_gl(&fit2, &b, &part).unwrap();
        assert_eq!(gl.bins()[0].gl_hat, Some(0.0));
    }

    #[test]
    fn overlapping_folds_rejected() {
        let ds = two_cluster_dataset(400, 7);
        let (fit1, _) = honest_folds(&ds, 13);
        let b = EqualMassBinning::fit(&fit1.scores(), 1).unwrap();
        let part = fit_partition(&fit1, &b, &PartitionConfig::default()).unwrap();
        let err = estimate_gl(&fit1, &b, &part).unwrap_err();
        assert!(matches!(err, GroupingError::FoldOverlap { shared } if shared == fit1.len()));
    }

    #[test]
    fn glar_gate_closed_equals_fallback() {
        // Calibrated data with no grouping: gate stays closed everywhere.
        let mut rng = SplitMix64::new(8);
        let samples: Vec<ScoredSample> = (0..4000)
            .map(|_| {
                let s = rng.next_f64();
                ScoredSample::with_features(s, rng.bernoulli(s), vec![rng.next_f64()])
            })
            .collect();
        let ds = ScoredDataset::new(samples).unwrap();
        let (fit1, fit2) = honest_folds(&ds, 21);
        let b = EqualMassBinning::fit(&fit1.scores(), 15).unwrap();
        let map = glar_fit(&fit1, &fit2, &b, &GlarConfig::new(0.5)).unwrap();
        assert!(!map.active());
        for s in ds.samples().iter().take(100) {
            assert_eq!(
                glar_apply(&map, s).unwrap(),
                map.fallback().eval(s.score),
            );
        }
    }

    #[test]
    fn glar_corrects_two_region_bin() {
        let ds = two_cluster_dataset(20_000, 9);
        let (fit1, fit2) = honest_folds(&ds, 22);
        let b = EqualMassBinning::fit(&fit1.scores(), 1).unwrap();
        let map = glar_fit(&fit1, &fit2, &b, &GlarConfig::new(0.5)).unwrap();
        assert!(map.active(), "overall rgl = {}", map.overall_rgl());
        let cold = ScoredSample::with_features(0.5, false, vec![-1.0]);
        let hot = ScoredSample::with_features(0.5, true, vec![1.0]);
        let p_cold = glar_apply(&map, &cold).unwrap();
        let p_hot = glar_apply(&map, &hot).unwrap();
        assert!((p_cold - 0.2).abs() < 0.03, "cold corrected to {p_cold}");
        assert!((p_hot - 0.8).abs() < 0.03, "hot corrected to {p_hot}");
    }

    #[test]
    fn infinite_gate_always_falls_back() {
        let ds = two_cluster_dataset(20_000, 10);
        let (fit1, fit2) = honest_folds(&ds, 23);
        let b = EqualMassBinning::fit(&fit1.scores(), 1).unwrap();
        let mut cfg = GlarConfig::new(0.5);
        cfg.gate = f64::INFINITY;
        let map = glar_fit(&fit1, &fit2, &b, &cfg).unwrap();
        assert!(!map.active());
    }

    #[test]
    fn glat_duality_on_random_samples() {
        let ds = two_cluster_dataset(20_000, 11);
        let (fit1, fit2) = honest_folds(&ds, 24);
        let b = EqualMassBinning::fit(&fit1.scores(), 1).unwrap();
        let map = glar_fit(&fit1, &fit2, &b, &GlarConfig::new(0.5)).unwrap();
        let t_star = 0.5;
        let mut rng = SplitMix64::new(99);
        for _ in 0..1000 {
            let sample = ScoredSample::with_features(
                rng.next_f64(),
                false,
                vec![if rng.bernoulli(0.5) { 1.0 } else { -1.0 }],
            );
            let corrected = glar_apply(&map, &sample).unwrap();
            let t_p = glat_threshold(&map, &sample, t_star).unwrap();
            assert_eq!(sample.score >= t_p, corrected >= t_star);
        }
    }

    #[test]
    fn glat_threshold_shifts_by_correction() {
        let binning = EqualMassBinning::fit(&[0.5], 1).unwrap();
        let map = GlarMap {
            binning,
            feature_dim: 1,
            trees: vec![BinTree::single_region()],
            region_probs: vec![vec![Some(0.7)]],
            bin_active: vec![true],
            fallback: StepMap::new(vec![0.0], vec![0.5]).unwrap(),
            overall_rgl: 1.0,
            bin_rgl: vec![Some(1.0)],
            config: GlarConfig::new(0.5),
        };
        // Correction 0.5 -> 0.7 lowers the per-sample threshold to 0.3.
        let s = ScoredSample::with_features(0.5, false, vec![0.0]);
        let t_p = glat_threshold(&map, &s, 0.5).unwrap();
        assert!((t_p - 0.3).abs() < 1e-12);

        // No correction leaves the threshold at t*.
        let identity = GlarMap {
            region_probs: vec![vec![Some(0.5)]],
            ..map
        };
        let t_p = glat_threshold(&identity, &s, 0.5).unwrap();
        assert!((t_p - 0.5).abs() < 1e-12);
    }
}
