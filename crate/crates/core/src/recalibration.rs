//! Post-training maps over scores: isotonic regression, Platt scaling,
//! histogram binning, threshold adjustment, and a linear logistic refit on
//! features.
//!
//! All fitted maps are immutable values. `apply` replaces a dataset's scores
//! and touches nothing else, so sample count and positive rate are invariant
//! under any correction.

use alloc::vec;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::binning::EqualMassBinning;
use crate::dataset::ScoredDataset;
use crate::math;

#[derive(Debug, Error, PartialEq)]
pub enum RecalError {
    #[error("scores and labels have different lengths ({scores} vs {labels})")]
    LengthMismatch { scores: usize, labels: usize },
    #[error("no data to fit")]
    EmptyInput,
    #[error("fitting requires both classes present")]
    SingleClass,
    #[error("step map knots must be strictly increasing")]
    UnsortedKnots,
    #[error("step map values must lie in [0, 1]")]
    ValueOutOfRange,
    #[error("threshold adjustment requires a nondecreasing curve")]
    NonMonotoneCurve,
    #[error("dataset has no features")]
    NoFeatures,
    #[error("map is incompatible with the dataset: {reason}")]
    IncompatibleMap { reason: &'static str },
    #[error("linear solve failed: singular system")]
    SingularSystem,
}

/// Piecewise-constant map on `[0, 1]`: `eval(s)` is the value of the last
/// knot at or below `s`, clamping to the first value below the first knot.
/// Isotonic fits produce nondecreasing values; histogram fits may not.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepMap {
    knots: Vec<f64>,
    values: Vec<f64>,
}

impl StepMap {
    pub fn new(knots: Vec<f64>, values: Vec<f64>) -> Result<Self, RecalError> {
        if knots.is_empty() {
            return Err(RecalError::EmptyInput);
        }
        if knots.len() != values.len() {
            return Err(RecalError::LengthMismatch {
                scores: knots.len(),
                labels: values.len(),
            });
        }
        if knots.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(RecalError::UnsortedKnots);
        }
        if values.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(RecalError::ValueOutOfRange);
        }
        Ok(Self { knots, values })
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn eval(&self, s: f64) -> f64 {
        match self.knots.binary_search_by(|k| k.partial_cmp(&s).unwrap()) {
            Ok(i) => self.values[i],
            Err(0) => self.values[0],
            Err(i) => self.values[i - 1],
        }
    }

    pub fn is_nondecreasing(&self) -> bool {
        self.values.windows(2).all(|w| w[0] <= w[1])
    }
}

/// Pool-adjacent-violators: the nondecreasing sequence minimizing weighted
/// squared error to `y`. Runs in O(n).
pub fn pava(y: &[f64], w: &[f64]) -> Vec<f64> {
    assert_eq!(y.len(), w.len());
    // Blocks of pooled values: (weighted mean, weight, count).
    let mut means: Vec<f64> = Vec::with_capacity(y.len());
    let mut weights: Vec<f64> = Vec::with_capacity(y.len());
    let mut counts: Vec<usize> = Vec::with_capacity(y.len());
    for (&yi, &wi) in y.iter().zip(w) {
        means.push(yi);
        weights.push(wi);
        counts.push(1);
        while means.len() > 1 && means[means.len() - 2] > means[means.len() - 1] {
            let (m2, w2, c2) = (
                means.pop().unwrap(),
                weights.pop().unwrap(),
                counts.pop().unwrap(),
            );
            let last = means.len() - 1;
            let w_new = weights[last] + w2;
            means[last] = (means[last] * weights[last] + m2 * w2) / w_new;
            weights[last] = w_new;
            counts[last] += c2;
        }
    }
    let mut out = Vec::with_capacity(y.len());
    for (m, c) in means.iter().zip(&counts) {
        out.extend(core::iter::repeat(*m).take(*c));
    }
    out
}

/// Least-squares nondecreasing fit of labels on scores: the minimizer of
/// `Σ (g(s_i) - y_i)²` over nondecreasing maps `g`. A map of the score
/// cannot tell tied scores apart, so ties collapse to their mean label
/// (sorted stably, labels second) and the pooling runs weighted by tie
/// counts.
pub fn isotonic_fit(scores: &[f64], labels: &[bool]) -> Result<StepMap, RecalError> {
    if scores.is_empty() {
        return Err(RecalError::EmptyInput);
    }
    if scores.len() != labels.len() {
        return Err(RecalError::LengthMismatch {
            scores: scores.len(),
            labels: labels.len(),
        });
    }
    let mut pairs: Vec<(f64, f64)> = scores
        .iter()
        .zip(labels)
        .map(|(&s, &l)| (s, if l { 1.0 } else { 0.0 }))
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));

    let mut knots: Vec<f64> = Vec::new();
    let mut sums: Vec<f64> = Vec::new();
    let mut weights: Vec<f64> = Vec::new();
    for &(s, y) in &pairs {
        if knots.last() == Some(&s) {
            *sums.last_mut().unwrap() += y;
            *weights.last_mut().unwrap() += 1.0;
        } else {
            knots.push(s);
            sums.push(y);
            weights.push(1.0);
        }
    }
    let means: Vec<f64> = sums.iter().zip(&weights).map(|(s, w)| s / w).collect();
    let values: Vec<f64> = pava(&means, &weights)
        .into_iter()
        .map(|v| v.clamp(0.0, 1.0))
        .collect();
    StepMap::new(knots, values)
}

/// Sigmoid map `s ↦ 1 / (1 + exp(-(a·s + b)))`; output strictly in (0, 1).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SigmoidMap {
    pub slope: f64,
    pub intercept: f64,
}

impl SigmoidMap {
    pub fn eval(&self, s: f64) -> f64 {
        math::sigmoid(self.slope * s + self.intercept)
    }
}

/// Result of a Platt fit. `converged` is false when the iteration cap was
/// hit (e.g. on separated data, where the slope grows without bound); the
/// best iterate is still a valid monotone map.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PlattFit {
    pub map: SigmoidMap,
    pub converged: bool,
    pub iterations: usize,
}

const PLATT_GRAD_TOL: f64 = 1e-8;
const PLATT_MAX_ITER: usize = 100;
// Trust-region cap on the Newton step. On separated data the likelihood has
// no finite optimum and uncapped steps race the slope to where the gradient
// underflows; the cap keeps the divergence visible until the iteration
// limit so it is reported as non-convergence.
const PLATT_MAX_STEP: f64 = 0.5;

/// Maximum-likelihood sigmoid on the raw score, by Newton iterations with
/// step halving.
pub fn platt_fit(scores: &[f64], labels: &[bool]) -> Result<PlattFit, RecalError> {
    if scores.is_empty() {
        return Err(RecalError::EmptyInput);
    }
    if scores.len() != labels.len() {
        return Err(RecalError::LengthMismatch {
            scores: scores.len(),
            labels: labels.len(),
        });
    }
    let positives = labels.iter().filter(|&&l| l).count();
    if positives == 0 || positives == labels.len() {
        return Err(RecalError::SingleClass);
    }

    let nll = |a: f64, b: f64| -> f64 {
        scores
            .iter()
            .zip(labels)
            .map(|(&s, &l)| {
                let z = a * s + b;
                if l {
                    -math::log_sigmoid(z)
                } else {
                    -math::log_sigmoid(-z)
                }
            })
            .sum()
    };

    let mut a = 0.0;
    let mut b = 0.0;
    let mut current = nll(a, b);
    let mut converged = false;
    let mut iterations = 0;
    for iter in 1..=PLATT_MAX_ITER {
        iterations = iter;
        let mut g = [0.0f64; 2];
        let mut h = [0.0f64; 3]; // [h_aa, h_ab, h_bb]
        for (&s, &l) in scores.iter().zip(labels) {
            let p = math::sigmoid(a * s + b);
            let r = p - if l { 1.0 } else { 0.0 };
            g[0] += r * s;
            g[1] += r;
            let v = p * (1.0 - p);
            h[0] += v * s * s;
            h[1] += v * s;
            h[2] += v;
        }
        // Gradient of the mean log-likelihood, so the tolerance does not
        // scale with the sample count.
        let n = scores.len() as f64;
        if math::sqrt(g[0] * g[0] + g[1] * g[1]) / n < PLATT_GRAD_TOL {
            converged = true;
            break;
        }
        // Newton direction for the 2x2 system, ridge-stabilized.
        let ridge = 1e-12;
        let det = (h[0] + ridge) * (h[2] + ridge) - h[1] * h[1];
        let (mut da, mut db) = if det.abs() > 1e-300 {
            (
                -((h[2] + ridge) * g[0] - h[1] * g[1]) / det,
                -(-h[1] * g[0] + (h[0] + ridge) * g[1]) / det,
            )
        } else {
            (-g[0], -g[1])
        };
        let norm = math::sqrt(da * da + db * db);
        if norm > PLATT_MAX_STEP {
            da *= PLATT_MAX_STEP / norm;
            db *= PLATT_MAX_STEP / norm;
        }
        let mut step = 1.0;
        loop {
            let candidate = nll(a + step * da, b + step * db);
            if candidate <= current || step < 1e-10 {
                a += step * da;
                b += step * db;
                current = candidate;
                break;
            }
            step *= 0.5;
        }
    }

    Ok(PlattFit {
        map: SigmoidMap {
            slope: a,
            intercept: b,
        },
        converged,
        iterations,
    })
}

/// Per-bin mean label over equal-mass bins. Not necessarily monotone.
pub fn histogram_binning_fit(
    scores: &[f64],
    labels: &[bool],
    n_bins: usize,
) -> Result<StepMap, RecalError> {
    if scores.is_empty() || n_bins == 0 {
        return Err(RecalError::EmptyInput);
    }
    if scores.len() != labels.len() {
        return Err(RecalError::LengthMismatch {
            scores: scores.len(),
            labels: labels.len(),
        });
    }
    let binning = EqualMassBinning::fit(scores, n_bins).map_err(|_| RecalError::EmptyInput)?;
    let mut mass = vec![0usize; binning.n_bins()];
    let mut positives = vec![0usize; binning.n_bins()];
    for (&s, &l) in scores.iter().zip(labels) {
        let i = binning.bin_index(s);
        mass[i] += 1;
        positives[i] += l as usize;
    }
    // Fitting scores populate every bin by construction of the edges.
    let knots: Vec<f64> = binning.edges()[..binning.n_bins()].to_vec();
    let values: Vec<f64> = (0..binning.n_bins())
        .map(|i| positives[i] as f64 / mass[i] as f64)
        .collect();
    StepMap::new(knots, values)
}

/// Where a monotone curve first reaches a target level, if anywhere.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum AdjustedThreshold {
    At(f64),
    /// The curve stays below the target everywhere: thresholding degenerates
    /// to the constant-0 rule.
    NeverReached,
}

impl AdjustedThreshold {
    /// Usable threshold value; `NeverReached` maps to +inf so that
    /// `score >= threshold` is false for every score.
    pub fn threshold(&self) -> f64 {
        match self {
            AdjustedThreshold::At(t) => *t,
            AdjustedThreshold::NeverReached => f64::INFINITY,
        }
    }
}

/// Infimum score at which the curve reaches `t_star`. For a nondecreasing
/// curve, deciding `score >= t_f` equals deciding `curve(score) >= t_star`
/// at every score.
pub fn adjust_threshold(curve: &StepMap, t_star: f64) -> Result<AdjustedThreshold, RecalError> {
    if !curve.is_nondecreasing() {
        return Err(RecalError::NonMonotoneCurve);
    }
    if curve.values()[0] >= t_star {
        // Below the first knot the curve clamps to its first value, so the
        // rule is constant 1 over the whole score range.
        return Ok(AdjustedThreshold::At(0.0));
    }
    for (k, v) in curve.knots().iter().zip(curve.values()) {
        if *v >= t_star {
            return Ok(AdjustedThreshold::At(*k));
        }
    }
    Ok(AdjustedThreshold::NeverReached)
}

/// Logistic model on feature vectors: `sigmoid(w·x + bias)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearLogitModel {
    pub weights: Vec<f64>,
    pub bias: f64,
}

impl LinearLogitModel {
    pub fn eval(&self, features: &[f64]) -> f64 {
        let z: f64 = self
            .weights
            .iter()
            .zip(features)
            .map(|(w, x)| w * x)
            .sum::<f64>()
            + self.bias;
        math::sigmoid(z)
    }
}

pub const DEFAULT_LOGISTIC_L2: f64 = 1.0;

/// L2-regularized logistic regression of labels on features (the bias is
/// not penalized). Deterministic Newton solve with step halving.
pub fn logistic_refit(ds: &ScoredDataset, lambda: f64) -> Result<LinearLogitModel, RecalError> {
    let d = ds.feature_dim();
    if d == 0 {
        return Err(RecalError::NoFeatures);
    }
    let positives = ds.positive_count();
    if positives == 0 || positives == ds.len() {
        return Err(RecalError::SingleClass);
    }

    let n = ds.len();
    let dim = d + 1; // weights then bias
    let mut theta = vec![0.0f64; dim];

    let objective = |theta: &[f64]| -> f64 {
        let mut nll = 0.0;
        for s in ds.samples() {
            let z: f64 = s
                .features
                .iter()
                .zip(&theta[..d])
                .map(|(x, w)| x * w)
                .sum::<f64>()
                + theta[d];
            nll -= if s.label {
                math::log_sigmoid(z)
            } else {
                math::log_sigmoid(-z)
            };
        }
        nll + 0.5 * lambda * theta[..d].iter().map(|w| w * w).sum::<f64>()
    };

    let mut current = objective(&theta);
    for _ in 0..100 {
        let mut grad = vec![0.0f64; dim];
        let mut hess = vec![0.0f64; dim * dim];
        for s in ds.samples() {
            let z: f64 = s
                .features
                .iter()
                .zip(&theta[..d])
                .map(|(x, w)| x * w)
                .sum::<f64>()
                + theta[d];
            let p = math::sigmoid(z);
            let r = p - s.label_value();
            let v = (p * (1.0 - p)).max(1e-12);
            for j in 0..dim {
                let xj = if j < d { s.features[j] } else { 1.0 };
                grad[j] += r * xj;
                for k in 0..=j {
                    let xk = if k < d { s.features[k] } else { 1.0 };
                    hess[j * dim + k] += v * xj * xk;
                }
            }
        }
        for j in 0..d {
            grad[j] += lambda * theta[j];
            hess[j * dim + j] += lambda;
        }
        // Mirror the lower triangle.
        for j in 0..dim {
            for k in (j + 1)..dim {
                hess[j * dim + k] = hess[k * dim + j];
            }
        }
        let grad_norm = math::sqrt(grad.iter().map(|g| g * g).sum::<f64>());
        if grad_norm < 1e-8 * (1.0 + n as f64) {
            break;
        }
        let rhs: Vec<f64> = grad.iter().map(|g| -g).collect();
        let delta = solve_dense(&mut hess, &rhs, dim)?;
        let mut step = 1.0;
        loop {
            let candidate: Vec<f64> = theta
                .iter()
                .zip(&delta)
                .map(|(t, dl)| t + step * dl)
                .collect();
            let value = objective(&candidate);
            if value <= current || step < 1e-10 {
                theta = candidate;
                current = value;
                break;
            }
            step *= 0.5;
        }
    }

    Ok(LinearLogitModel {
        weights: theta[..d].to_vec(),
        bias: theta[d],
    })
}

/// Gaussian elimination with partial pivoting; `a` is row-major n x n and is
/// consumed.
fn solve_dense(a: &mut [f64], b: &[f64], n: usize) -> Result<Vec<f64>, RecalError> {
    let mut x = b.to_vec();
    for col in 0..n {
        let pivot_row = (col..n)
            .max_by(|&i, &j| a[i * n + col].abs().total_cmp(&a[j * n + col].abs()))
            .unwrap();
        if a[pivot_row * n + col].abs() < 1e-300 {
            return Err(RecalError::SingularSystem);
        }
        if pivot_row != col {
            for k in 0..n {
                a.swap(col * n + k, pivot_row * n + k);
            }
            x.swap(col, pivot_row);
        }
        for row in (col + 1)..n {
            let factor = a[row * n + col] / a[col * n + col];
            if factor == 0.0 {
                continue;
            }
            for k in col..n {
                a[row * n + k] -= factor * a[col * n + k];
            }
            x[row] -= factor * x[col];
        }
    }
    for col in (0..n).rev() {
        let mut sum = x[col];
        for k in (col + 1)..n {
            sum -= a[col * n + k] * x[k];
        }
        x[col] = sum / a[col * n + col];
    }
    Ok(x)
}

/// Any fitted correction, with a self-describing serialized form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum RecalibrationMap {
    Isotonic(StepMap),
    Platt(SigmoidMap),
    Histogram(StepMap),
    Linear(LinearLogitModel),
}

impl RecalibrationMap {
    pub fn eval(&self, sample_score: f64, features: &[f64]) -> f64 {
        match self {
            RecalibrationMap::Isotonic(m) | RecalibrationMap::Histogram(m) => {
                m.eval(sample_score)
            }
            RecalibrationMap::Platt(m) => m.eval(sample_score),
            RecalibrationMap::Linear(m) => m.eval(features),
        }
    }
}

/// Replace every score with the map's output. Labels, features, origin and
/// order are untouched; outputs are clamped into `[0, 1]`.
pub fn apply(map: &RecalibrationMap, ds: &ScoredDataset) -> Result<ScoredDataset, RecalError> {
    if let RecalibrationMap::Linear(m) = map {
        if ds.feature_dim() != m.weights.len() {
            return Err(RecalError::IncompatibleMap {
                reason: "linear model dimension does not match dataset features",
            });
        }
    }
    let scores: Vec<f64> = ds
        .samples()
        .iter()
        .map(|s| map.eval(s.score, &s.features).clamp(0.0, 1.0))
        .collect();
    ds.with_scores(&scores)
        .map_err(|_| RecalError::IncompatibleMap {
            reason: "score replacement failed",
        })
}
