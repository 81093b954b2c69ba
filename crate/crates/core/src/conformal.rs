//! Split conformal prediction sets for classification.
//!
//! # Scores
//!
//! Classes are ranked by descending probability, ties broken by class index;
//! `o(y)` is the 1-based rank of `y` and `u ∈ [0, 1)` a uniform draw.
//!
//! * APS: `Σ_{o(k) ≤ o(y)} p_k`, randomized by subtracting `u·p_y`.
//! * RAPS: the APS score plus `λ·max(0, o(y) − k_reg)`.
//! * SAPS: `u·p_max` when `o(y) = 1`, otherwise `p_max + (o(y) − 2 + u)·λ`.
//!   The deterministic variant takes `u = 1`.
//!
//! Draws are keyed by `(instance seed, node, time, label)` so a pair scores
//! its label the same way whether it calibrates or is tested.
//!
//! # Calibration
//!
//! With `m` = calibration size + 1 and `k = ⌊α·m⌋`, the threshold `q̂` is the
//! `k`-th largest calibration score (`+∞` when `k = 0`, `−∞` when `k`
//! exceeds the calibration size) and label `y` is dropped from the set when
//! its score is `≥ q̂`.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::NodeTimePair;
use crate::rng;

/// Tolerance on `Σ p = 1`.
pub const SIMPLEX_TOL: f64 = 1e-6;

/// Guard for `α·m` landing a hair below an integer.
const FLOOR_EPS: f64 = 1e-9;

pub const LAMBDA_GRID: [f64; 4] = [0.001, 0.01, 0.1, 1.0];
pub const K_REG_GRID: [usize; 4] = [0, 1, 2, 5];
/// Smallest calibration set that can be split for tuning.
pub const MIN_TUNING_CALIBRATION: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoreKind {
    Aps,
    Raps,
    Saps,
}

impl ScoreKind {
    pub fn label(self) -> &'static str {
        match self {
            ScoreKind::Aps => "aps",
            ScoreKind::Raps => "raps",
            ScoreKind::Saps => "saps",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScoreSpec {
    pub kind: ScoreKind,
    pub randomized: bool,
    pub raps_lambda: f64,
    pub raps_k_reg: usize,
    pub saps_lambda: f64,
    /// Share of the calibration set held out to tune RAPS/SAPS.
    pub holdout_fraction: f64,
    /// Grid-search `λ` (and `k_reg`) before calibrating.
    pub tune: bool,
    pub seed: u64,
}

impl Default for ScoreSpec {
    fn default() -> Self {
        Self {
            kind: ScoreKind::Aps,
            randomized: true,
            raps_lambda: 0.01,
            raps_k_reg: 1,
            saps_lambda: 0.1,
            holdout_fraction: 0.2,
            tune: true,
            seed: 0,
        }
    }
}

impl ScoreSpec {
    pub fn aps() -> Self {
        Self::default()
    }

    pub fn raps(lambda: f64, k_reg: usize) -> Self {
        Self {
            kind: ScoreKind::Raps,
            raps_lambda: lambda,
            raps_k_reg: k_reg,
            ..Self::default()
        }
    }

    pub fn saps(lambda: f64) -> Self {
        Self {
            kind: ScoreKind::Saps,
            saps_lambda: lambda,
            ..Self::default()
        }
    }

    pub fn deterministic(mut self) -> Self {
        self.randomized = false;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let ok = |v: f64| v.is_finite() && v >= 0.0;
        if !ok(self.raps_lambda) {
            return Err(Error::config("score.raps_lambda", "must be non-negative and finite"));
        }
        if !ok(self.saps_lambda) {
            return Err(Error::config("score.saps_lambda", "must be non-negative and finite"));
        }
        if !(self.holdout_fraction > 0.0 && self.holdout_fraction < 1.0) {
            return Err(Error::config("score.holdout_fraction", "must lie in (0, 1)"));
        }
        Ok(())
    }

    /// The draw used for `label` of `pair` in the instance keyed by `seed`.
    pub fn uniform(&self, seed: u64, pair: NodeTimePair, label: usize) -> f64 {
        if self.randomized {
            rng::keyed_uniform(seed, &[pair.node as u64, pair.time as u64, label as u64])
        } else {
            match self.kind {
                ScoreKind::Saps => 1.0,
                _ => 0.0,
            }
        }
    }
}

fn check_simplex(probs: &[f64]) -> Result<()> {
    if probs.iter().any(|p| !p.is_finite() || *p < 0.0) {
        return Err(Error::NotASimplex { sum: f64::NAN });
    }
    let sum: f64 = probs.iter().sum();
    if (sum - 1.0).abs() > SIMPLEX_TOL {
        return Err(Error::NotASimplex { sum });
    }
    Ok(())
}

/// Class indices in descending probability order, ties by index.
fn ranking(probs: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..probs.len()).collect();
    order.sort_by(|&a, &b| probs[b].total_cmp(&probs[a]).then(a.cmp(&b)));
    order
}

/// Scores of every label at once. `u(label)` supplies the draws.
pub fn label_scores(probs: &[f64], spec: &ScoreSpec, mut u: impl FnMut(usize) -> f64) -> Result<Vec<f64>> {
    check_simplex(probs)?;
    let order = ranking(probs);
    let p_max = probs[order[0]];
    let mut out = vec![0.0; probs.len()];
    let mut cumulative = 0.0;
    for (pos, &y) in order.iter().enumerate() {
        let rank = pos + 1;
        cumulative += probs[y];
        out[y] = match spec.kind {
            ScoreKind::Aps | ScoreKind::Raps => {
                let mut s = cumulative;
                if spec.randomized {
                    s -= u(y) * probs[y];
                }
                if spec.kind == ScoreKind::Raps {
                    s += spec.raps_lambda * rank.saturating_sub(spec.raps_k_reg) as f64;
                }
                s
            }
            ScoreKind::Saps => {
                let draw = if spec.randomized { u(y) } else { 1.0 };
                if rank == 1 {
                    draw * p_max
                } else {
                    p_max + (rank as f64 - 2.0 + draw) * spec.saps_lambda
                }
            }
        };
    }
    Ok(out)
}

/// Non-conformity of `label` under `probs`.
pub fn score(probs: &[f64], label: usize, spec: &ScoreSpec, u: f64) -> Result<f64> {
    if label >= probs.len() {
        return Err(Error::LabelOutOfRange {
            label,
            d: probs.len(),
        });
    }
    Ok(label_scores(probs, spec, |_| u)?[label])
}

/// `⌊α·m⌋`.
pub fn threshold_rank(alpha: f64, m: usize) -> usize {
    (alpha * m as f64 + FLOOR_EPS).floor() as usize
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CalibrationModel {
    pub q_hat: f64,
    pub k: usize,
    pub m: usize,
    pub alpha: f64,
    pub scores: Vec<f64>,
}

/// Threshold from calibration scores.
pub fn calibrate(scores: &[f64], alpha: f64, m: usize) -> Result<CalibrationModel> {
    if scores.is_empty() {
        return Err(Error::Empty("calibration set"));
    }
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::config("regime.alpha", "must lie in [0, 1]"));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::NonFinite {
            layer: 0,
            stage: "calibration scores",
        });
    }
    let k = threshold_rank(alpha, m);
    let q_hat = if k == 0 {
        f64::INFINITY
    } else if k > scores.len() {
        f64::NEG_INFINITY
    } else {
        let mut sorted = scores.to_vec();
        sorted.sort_by(|a, b| b.total_cmp(a));
        sorted[k - 1]
    };
    Ok(CalibrationModel {
        q_hat,
        k,
        m,
        alpha,
        scores: scores.to_vec(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PredictionSet {
    pub pair: NodeTimePair,
    /// Included labels in increasing order.
    pub labels: Vec<usize>,
    /// Score of every label.
    pub scores: Vec<f64>,
}

impl PredictionSet {
    pub fn contains(&self, label: usize) -> bool {
        self.labels.binary_search(&label).is_ok()
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

/// Labels whose score stays below `q_hat`.
pub fn set_from_scores(pair: NodeTimePair, scores: Vec<f64>, q_hat: f64) -> PredictionSet {
    let labels = (0..scores.len()).filter(|&y| scores[y] < q_hat).collect();
    PredictionSet { pair, labels, scores }
}

/// Prediction set for one test pair from its logits row.
pub fn predict_set(
    pair: NodeTimePair,
    logits: &[f64],
    model: &CalibrationModel,
    spec: &ScoreSpec,
    instance_seed: u64,
) -> Result<PredictionSet> {
    let probs = crate::gnn::softmax(ndarray::ArrayView1::from(logits));
    let scores = label_scores(probs.as_slice().expect("contiguous"), spec, |y| spec.uniform(instance_seed, pair, y))?;
    Ok(set_from_scores(pair, scores, model.q_hat))
}

/// Full conformal inference by brute force.
///
/// `algorithm(y)` returns the `m` scores obtained when position
/// `test_position` carries candidate label `y`. Label `y` is excluded when
/// its score ranks among the `⌊α·m⌋` largest, i.e. when fewer than `⌊α·m⌋`
/// other scores are strictly larger.
pub fn full_conformal<F>(d: usize, test_position: usize, alpha: f64, mut algorithm: F) -> Result<Vec<usize>>
where
    F: FnMut(usize) -> Result<Vec<f64>>,
{
    let mut kept = Vec::new();
    for y in 0..d {
        let scores = algorithm(y)?;
        let m = scores.len();
        if test_position >= m {
            return Err(Error::InvalidIndex(format!(
                "test position {test_position} outside {m} scores"
            )));
        }
        let k = threshold_rank(alpha, m);
        let r = scores[test_position];
        let above = scores
            .iter()
            .enumerate()
            .filter(|&(l, &s)| l != test_position && s > r)
            .count();
        if above >= k {
            kept.push(y);
        }
    }
    Ok(kept)
}

/// The split-conformal algorithm written as a full-conformal score map:
/// calibration scores are fixed and only the test position depends on the
/// candidate label.
pub fn split_algorithm<'a>(
    calibration: &'a [f64],
    test_scores: &'a [f64],
    test_position: usize,
) -> impl FnMut(usize) -> Result<Vec<f64>> + 'a {
    move |y| {
        let mut all = Vec::with_capacity(calibration.len() + 1);
        all.extend_from_slice(&calibration[..test_position.min(calibration.len())]);
        all.push(test_scores[y]);
        all.extend_from_slice(&calibration[test_position.min(calibration.len())..]);
        Ok(all)
    }
}

/// A calibration point seen by the tuner.
#[derive(Debug, Clone)]
pub struct CalibrationPoint<'a> {
    pub pair: NodeTimePair,
    pub probs: &'a [f64],
    pub label: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TunedScore {
    pub spec: ScoreSpec,
    /// Positions (into the calibration list) used for tuning.
    pub holdout: Vec<usize>,
    /// Positions left for calibration.
    pub calibration: Vec<usize>,
    /// Holdout `(mean set size, coverage)` per grid candidate, in grid order.
    pub grid: Vec<(ScoreSpec, f64, f64)>,
}

fn candidates(spec: &ScoreSpec) -> Vec<ScoreSpec> {
    match spec.kind {
        ScoreKind::Aps => vec![spec.clone()],
        ScoreKind::Raps => LAMBDA_GRID
            .iter()
            .flat_map(|&l| {
                K_REG_GRID.iter().map(move |&k| ScoreSpec {
                    raps_lambda: l,
                    raps_k_reg: k,
                    ..spec.clone()
                })
            })
            .collect(),
        ScoreKind::Saps => LAMBDA_GRID
            .iter()
            .map(|&l| ScoreSpec {
                saps_lambda: l,
                ..spec.clone()
            })
            .collect(),
    }
}

/// Leave-one-out conformal sets over the holdout: each point is tested
/// against a threshold from the remaining holdout points.
fn holdout_quality(points: &[&CalibrationPoint<'_>], spec: &ScoreSpec, alpha: f64, seed: u64) -> Result<(f64, f64)> {
    let all: Vec<Vec<f64>> = points
        .iter()
        .map(|p| label_scores(p.probs, spec, |y| spec.uniform(seed, p.pair, y)))
        .collect::<Result<_>>()?;
    let truth: Vec<f64> = points.iter().zip(&all).map(|(p, s)| s[p.label]).collect();
    let mut sorted = truth.clone();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let h = points.len();
    // m = (h − 1) others + 1 test point.
    let k = threshold_rank(alpha, h);
    let mut size = 0.0;
    let mut covered = 0.0;
    for (j, p) in points.iter().enumerate() {
        let q_hat = if k == 0 {
            f64::INFINITY
        } else if k > h - 1 {
            f64::NEG_INFINITY
        } else {
            // k-th largest once this point's own score is removed.
            let own_in_top = sorted[k - 1] <= truth[j];
            if own_in_top {
                sorted[k]
            } else {
                sorted[k - 1]
            }
        };
        let set = set_from_scores(p.pair, all[j].clone(), q_hat);
        size += set.len() as f64;
        covered += f64::from(u8::from(set.contains(p.label)));
    }
    Ok((size / h as f64, covered / h as f64))
}

/// Grid-searches the RAPS/SAPS penalty on a held-out share of the
/// calibration set. The winner has the smallest mean holdout set size among
/// candidates reaching `1 − α` holdout coverage (first in grid order on
/// ties); when none does, the best-covering candidate wins.
pub fn tune_score_hyperparams(
    points: &[CalibrationPoint<'_>],
    spec: &ScoreSpec,
    alpha: f64,
    instance_seed: u64,
) -> Result<TunedScore> {
    let all: Vec<usize> = (0..points.len()).collect();
    if spec.kind == ScoreKind::Aps {
        return Ok(TunedScore {
            spec: spec.clone(),
            holdout: Vec::new(),
            calibration: all,
            grid: Vec::new(),
        });
    }
    if points.len() < MIN_TUNING_CALIBRATION {
        return Err(Error::config(
            "score.tune",
            format!(
                "tuning needs at least {MIN_TUNING_CALIBRATION} calibration points, got {}",
                points.len()
            ),
        ));
    }
    let mut order = all;
    order.shuffle(&mut rng::stream(rng::derive_seed(instance_seed, &[0x7e]), 0));
    let h = (spec.holdout_fraction * points.len() as f64 - FLOOR_EPS).ceil() as usize;
    let h = h.clamp(2, points.len() - 1);
    let holdout: Vec<usize> = order[..h].to_vec();
    let mut calibration: Vec<usize> = order[h..].to_vec();
    calibration.sort_unstable();

    let held: Vec<&CalibrationPoint<'_>> = holdout.iter().map(|&i| &points[i]).collect();
    let first = held[0].label;
    if held.iter().all(|p| p.label == first) {
        log::warn!("tuning holdout holds a single class; falling back to lambda = 0");
        let mut fallback = spec.clone();
        fallback.raps_lambda = 0.0;
        fallback.saps_lambda = 0.0;
        return Ok(TunedScore {
            spec: fallback,
            holdout,
            calibration,
            grid: Vec::new(),
        });
    }

    let mut grid = Vec::new();
    for cand in candidates(spec) {
        let (size, cov) = holdout_quality(&held, &cand, alpha, instance_seed)?;
        grid.push((cand, size, cov));
    }
    let target = 1.0 - alpha - FLOOR_EPS;
    let valid = grid
        .iter()
        .filter(|g| g.2 >= target)
        .fold(None::<&(ScoreSpec, f64, f64)>, |best, g| match best {
            Some(b) if b.1 <= g.1 => Some(b),
            _ => Some(g),
        });
    let chosen = match valid {
        Some(g) => g.0.clone(),
        None => grid
            .iter()
            .fold(None::<&(ScoreSpec, f64, f64)>, |best, g| match best {
                Some(b) if b.2 >= g.2 => Some(b),
                _ => Some(g),
            })
            .expect("grid is non-empty")
            .0
            .clone(),
    };
    Ok(TunedScore {
        spec: chosen,
        holdout,
        calibration,
        grid,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const W: NodeTimePair = NodeTimePair::new(0, 0);

    #[test]
    fn aps_examples() {
        let det = ScoreSpec::aps().deterministic();
        let p = [0.5, 0.3, 0.2];
        assert!((score(&p, 1, &det, 0.0).unwrap() - 0.8).abs() < 1e-12);
        assert!((score(&p, 0, &det, 0.0).unwrap() - 0.5).abs() < 1e-12);
        assert!((score(&p, 2, &det, 0.0).unwrap() - 1.0).abs() < 1e-12);
        let rand = ScoreSpec::aps();
        assert!((score(&p, 1, &rand, 0.5).unwrap() - 0.65).abs() < 1e-12);
    }

    #[test]
    fn ties_rank_by_class_index() {
        let det = ScoreSpec::aps().deterministic();
        let p = [0.4, 0.4, 0.2];
        assert!((score(&p, 0, &det, 0.0).unwrap() - 0.4).abs() < 1e-12);
        assert!((score(&p, 1, &det, 0.0).unwrap() - 0.8).abs() < 1e-12);
    }

    #[test]
    fn raps_and_saps_formulas() {
        let p = [0.2, 0.5, 0.3];
        let raps = ScoreSpec::raps(0.1, 1).deterministic();
        // label 0 has rank 3: 1.0 + 0.1·2
        assert!((score(&p, 0, &raps, 0.0).unwrap() - 1.2).abs() < 1e-12);
        assert!((score(&p, 1, &raps, 0.0).unwrap() - 0.5).abs() < 1e-12);
        let saps = ScoreSpec::saps(0.25);
        assert!((score(&p, 1, &saps, 0.4).unwrap() - 0.2).abs() < 1e-12);
        // rank 3: 0.5 + (3 − 2 + 0.4)·0.25
        assert!((score(&p, 0, &saps, 0.4).unwrap() - 0.85).abs() < 1e-12);
        let det = ScoreSpec::saps(0.25).deterministic();
        assert!((score(&p, 2, &det, 0.0).unwrap() - 0.75).abs() < 1e-12);
    }

    #[test]
    fn malformed_inputs() {
        let s = ScoreSpec::aps();
        assert!(matches!(score(&[0.5, 0.6], 0, &s, 0.1), Err(Error::NotASimplex { .. })));
        assert!(matches!(score(&[0.5, 0.5], 2, &s, 0.1), Err(Error::LabelOutOfRange { .. })));
        assert!(calibrate(&[], 0.1, 1).is_err());
    }

    #[test]
    fn calibration_examples() {
        let scores: Vec<f64> = (1..=9).map(|i| i as f64 / 10.0).collect();
        let c = calibrate(&scores, 0.2, 10).unwrap();
        assert_eq!(c.k, 2);
        assert!((c.q_hat - 0.8).abs() < 1e-12);
        let c = calibrate(&scores, 0.05, 10).unwrap();
        assert_eq!(c.k, 0);
        assert_eq!(c.q_hat, f64::INFINITY);
        let c = calibrate(&scores, 1.0, 9).unwrap();
        assert_eq!(c.k, 9);
        assert!((c.q_hat - 0.1).abs() < 1e-12);
        let c = calibrate(&scores, 1.0, 10).unwrap();
        assert_eq!(c.q_hat, f64::NEG_INFINITY);
        // 0.1 · 30 is 3.0000000000000004 in binary
        assert_eq!(threshold_rank(0.1, 30), 3);
        assert_eq!(threshold_rank(0.7, 10), 7);
    }

    #[test]
    fn prediction_set_example() {
        let logits: Vec<f64> = [0.7f64, 0.2, 0.1].iter().map(|p| p.ln()).collect();
        let model = CalibrationModel {
            q_hat: 0.95,
            k: 1,
            m: 2,
            alpha: 0.5,
            scores: vec![0.95],
        };
        let set = predict_set(W, &logits, &model, &ScoreSpec::aps().deterministic(), 0).unwrap();
        assert_eq!(set.labels, vec![0, 1]);
        let full = CalibrationModel {
            q_hat: f64::INFINITY,
            ..model.clone()
        };
        assert_eq!(predict_set(W, &logits, &full, &ScoreSpec::aps(), 0).unwrap().len(), 3);
        let none = CalibrationModel {
            q_hat: f64::NEG_INFINITY,
            ..model
        };
        assert!(predict_set(W, &logits, &none, &ScoreSpec::aps(), 0).unwrap().is_empty());
    }

    #[test]
    fn full_conformal_by_hand() {
        // m = 4 fixed scores; position 3 is the test point.
        let table = [
            [0.9, 0.2, 0.4, 0.1],
            [0.9, 0.2, 0.4, 0.5],
            [0.9, 0.2, 0.4, 0.95],
        ];
        let alg = |y: usize| Ok(table[y].to_vec());
        // α = 0.5: k = 2. y=0: 3 above → keep. y=1: 1 above → drop. y=2: 0 above → drop.
        assert_eq!(full_conformal(3, 3, 0.5, alg).unwrap(), vec![0]);
        assert_eq!(full_conformal(3, 3, 0.1, alg).unwrap(), vec![0, 1, 2]);
        // α = 0.25: k = 1. y=1 has one score above → keep.
        assert_eq!(full_conformal(3, 3, 0.25, alg).unwrap(), vec![0, 1]);
    }

    #[test]
    fn aps_spec_is_not_tuned() {
        let p = [0.6, 0.4];
        let pts: Vec<_> = (0..3)
            .map(|i| CalibrationPoint {
                pair: NodeTimePair::new(i, 0),
                probs: &p,
                label: 0,
            })
            .collect();
        let t = tune_score_hyperparams(&pts, &ScoreSpec::aps(), 0.1, 0).unwrap();
        assert_eq!(t.spec, ScoreSpec::aps());
        assert_eq!(t.calibration, vec![0, 1, 2]);
    }
}
