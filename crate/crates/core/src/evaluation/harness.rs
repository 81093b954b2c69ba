//! Fits models and runs conformal instances over them.
//!
//! Transductive and temporal-transductive experiments train `n_fits` models
//! and reshuffle calibration/test roles `n_permutations` times within each
//! fit's calibration ∪ test pool. Semi-inductive experiments train one model
//! per split, since the test block is fixed by time. Every job's seed is
//! derived from the regime seed and its `(fit, permutation)` position, and
//! results are merged in job order, so the worker count never changes the
//! output.

use ndarray::Array2;
use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::metrics::{InstanceResult, MetricsReport, WindowCounts};
use super::split::{sample_split, Regime, RegimeSpec};
use crate::conformal::{calibrate, label_scores, set_from_scores, tune_score_hyperparams, CalibrationPoint, ScoreSpec};
use crate::error::{Error, Result};
use crate::gnn::{argmax_rows, softmax_rows, train_prepared, Architecture, ModelConfig, PreparedGraph, TrainingMask};
use crate::graph::{AttributeTable, DynamicGraph, LabelTable, NodeTimeIndex, NodeTimePair, Role};
use crate::ingestion::build_index;
use crate::representation::{block_diagonal, make_features, unfold, Representation, RepresentationKind};
use crate::rng;

const FIT_TAG: u64 = 0xf1;
const PERMUTATION_TAG: u64 = 0x9e;
const MODEL_TAG: u64 = 0x30;
const INSTANCE_TAG: u64 = 0x1c;

/// A labeled dynamic graph ready for experiments.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub name: String,
    pub graph: DynamicGraph,
    pub labels: LabelTable,
    pub attributes: AttributeTable,
    /// Labeled pairs with non-empty columns, time-major.
    pub eligible: NodeTimeIndex,
}

impl Dataset {
    pub fn new(name: impl Into<String>, graph: DynamicGraph, labels: LabelTable, attributes: AttributeTable) -> Result<Self> {
        if labels.n() != graph.n() || labels.num_times() != graph.num_times() {
            return Err(Error::DimensionMismatch("label table does not match the graph".into()));
        }
        let eligible = build_index(&graph, &labels);
        if eligible.is_empty() {
            return Err(Error::Empty("eligible node/time pairs"));
        }
        Ok(Self {
            name: name.into(),
            attributes,
            eligible,
            graph,
            labels,
        })
    }

    pub fn identity_features(name: impl Into<String>, graph: DynamicGraph, labels: LabelTable) -> Result<Self> {
        let attrs = AttributeTable::identity(graph.n(), graph.num_times());
        Self::new(name, graph, labels, attrs)
    }

    /// The requested representation with features attached. Directed graphs
    /// are symmetrized for the block-diagonal baseline.
    pub fn representation(&self, kind: RepresentationKind) -> Result<Representation> {
        let rep = match kind {
            RepresentationKind::Unfolded => unfold(&self.graph),
            RepresentationKind::BlockDiagonal => block_diagonal(&self.graph, self.graph.is_directed())?,
        };
        let features = make_features(&rep, &self.attributes)?;
        rep.with_features(features)
    }
}

/// A representation/architecture pair, e.g. UGCN or block GAT.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Method {
    pub representation: RepresentationKind,
    pub model: ModelConfig,
}

impl Method {
    pub fn new(representation: RepresentationKind, architecture: Architecture) -> Self {
        let model = match architecture {
            Architecture::Gcn => ModelConfig::gcn(),
            Architecture::Gat => ModelConfig::gat(),
        };
        Self { representation, model }
    }

    pub fn name(&self) -> String {
        let arch = self.model.architecture.label();
        match self.representation {
            RepresentationKind::Unfolded => format!("u{arch}"),
            RepresentationKind::BlockDiagonal => format!("block_{arch}"),
        }
    }
}

/// Seeds and training summary of one fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitRecord {
    pub fit: usize,
    pub split_seed: u64,
    pub model_seed: u64,
    pub epochs_run: usize,
    pub best_epoch: usize,
    pub best_val_loss: f64,
    /// Set when training diverged and the fit's instances were skipped.
    pub skipped: Option<String>,
}

#[derive(Debug, Clone)]
pub struct ExperimentResult {
    pub report: MetricsReport,
    pub instances: Vec<InstanceResult>,
    pub fits: Vec<FitRecord>,
    /// Scoring rule actually used by each instance (after tuning).
    pub scores: Vec<ScoreSpec>,
}

/// Calibrates on `calibration` and predicts every pair of `test`.
#[allow(clippy::too_many_arguments)]
pub fn conformal_instance(
    probs: &Array2<f64>,
    predicted: &[usize],
    row_of: impl Fn(NodeTimePair) -> usize,
    labels: &LabelTable,
    calibration: &[NodeTimePair],
    test: &[NodeTimePair],
    spec: &ScoreSpec,
    alpha: f64,
    seed: u64,
    num_times: usize,
) -> Result<(InstanceResult, ScoreSpec)> {
    let truth = |p: NodeTimePair| {
        labels
            .get(p)
            .ok_or_else(|| Error::InvalidIndex(format!("pair ({}, {}) has no label", p.node, p.time)))
    };
    let rows: Vec<usize> = calibration.iter().map(|&p| row_of(p)).collect();
    let points: Vec<CalibrationPoint<'_>> = calibration
        .iter()
        .zip(&rows)
        .map(|(&pair, &r)| {
            Ok(CalibrationPoint {
                pair,
                probs: probs.row(r).to_slice().expect("contiguous"),
                label: truth(pair)?,
            })
        })
        .collect::<Result<_>>()?;
    let (spec, used) = if spec.tune {
        let tuned = tune_score_hyperparams(&points, spec, alpha, seed)?;
        (tuned.spec, tuned.calibration)
    } else {
        (spec.clone(), (0..points.len()).collect())
    };
    let cal_scores: Vec<f64> = used
        .iter()
        .map(|&i| {
            let p = &points[i];
            Ok(label_scores(p.probs, &spec, |y| spec.uniform(seed, p.pair, y))?[p.label])
        })
        .collect::<Result<_>>()?;
    let model = calibrate(&cal_scores, alpha, cal_scores.len() + 1)?;

    let mut windows = vec![WindowCounts::default(); num_times];
    for &pair in test {
        let r = row_of(pair);
        let y = truth(pair)?;
        let scores = label_scores(probs.row(r).to_slice().expect("contiguous"), &spec, |l| spec.uniform(seed, pair, l))?;
        let set = set_from_scores(pair, scores, model.q_hat);
        let w = &mut windows[pair.time];
        w.points += 1;
        w.correct += usize::from(predicted[r] == y);
        w.covered += usize::from(set.contains(y));
        w.set_size_total += set.len();
    }
    Ok((
        InstanceResult {
            fit: 0,
            permutation: 0,
            seed,
            q_hat: model.q_hat,
            windows,
        },
        spec,
    ))
}

/// Seed of permutation `perm` of the fit whose split used `split_seed`.
pub fn permutation_seed(split_seed: u64, perm: usize) -> u64 {
    rng::derive_seed(split_seed, &[PERMUTATION_TAG, perm as u64])
}

/// Calibration and test pairs of one permutation: the pool is shuffled with
/// `seed` and its first `n_cal` pairs calibrate.
pub fn permutation_roles(pool: &[NodeTimePair], n_cal: usize, seed: u64) -> (Vec<NodeTimePair>, Vec<NodeTimePair>) {
    let mut shuffled = pool.to_vec();
    shuffled.shuffle(&mut rng::stream(seed, 0));
    let test = shuffled.split_off(n_cal.min(shuffled.len()));
    (shuffled, test)
}

struct FitOutput {
    record: FitRecord,
    instances: Vec<(InstanceResult, ScoreSpec)>,
}

fn run_fit(
    dataset: &Dataset,
    graph: &PreparedGraph,
    method: &Method,
    regime: &RegimeSpec,
    score: &ScoreSpec,
    fit: usize,
) -> Result<FitOutput> {
    let split_seed = rng::derive_seed(regime.seed, &[FIT_TAG, fit as u64]);
    let model_seed = rng::derive_seed(split_seed, &[MODEL_TAG]);
    let num_times = dataset.graph.num_times();
    let index = sample_split(dataset.eligible.pairs(), regime, num_times, split_seed)?;
    let layout = graph.layout;
    let train_mask = TrainingMask::from_index(&index, &dataset.labels, &layout, Role::Training)?;
    let val_mask = TrainingMask::from_index(&index, &dataset.labels, &layout, Role::Validation)?;
    let config = method.model.clone().with_seed(model_seed);
    let mut record = FitRecord {
        fit,
        split_seed,
        model_seed,
        epochs_run: 0,
        best_epoch: 0,
        best_val_loss: f64::NAN,
        skipped: None,
    };
    let trained = match train_prepared(graph, &train_mask, &val_mask, dataset.labels.d(), &config) {
        Ok(t) => t,
        Err(e @ (Error::Diverged { .. } | Error::NonFinite { .. })) => {
            log::warn!("fit {fit} skipped: {e}");
            record.skipped = Some(e.to_string());
            return Ok(FitOutput {
                record,
                instances: Vec::new(),
            });
        }
        Err(e) => return Err(e),
    };
    record.epochs_run = trained.epochs_run;
    record.best_epoch = trained.best_epoch;
    record.best_val_loss = trained.best_val_loss;

    let probs = softmax_rows(&trained.logits);
    let predicted = argmax_rows(&trained.logits);
    let row_of = |p: NodeTimePair| layout.row_of(p);
    let pool = &index.pairs()[..index.m()];
    let n_cal = index.counts().calibration;

    let mut instances = Vec::with_capacity(regime.permutations());
    for perm in 0..regime.permutations() {
        let seed = permutation_seed(split_seed, perm);
        let (cal, test) = if regime.regime == Regime::SemiInductive {
            (
                index.with_role(Role::Calibration).collect(),
                index.with_role(Role::Test).collect(),
            )
        } else {
            permutation_roles(pool, n_cal, seed)
        };
        let instance_seed = rng::derive_seed(seed, &[INSTANCE_TAG, score.seed]);
        let (mut result, spec) = conformal_instance(
            &probs,
            &predicted,
            row_of,
            &dataset.labels,
            &cal,
            &test,
            score,
            regime.alpha,
            instance_seed,
            num_times,
        )?;
        result.fit = fit;
        result.permutation = perm;
        instances.push((result, spec));
    }
    Ok(FitOutput { record, instances })
}

/// Runs every fit and instance of one method under one regime.
///
/// `jobs` caps the worker threads (`None` uses the global pool).
pub fn run_experiment(
    dataset: &Dataset,
    method: &Method,
    regime: &RegimeSpec,
    score: &ScoreSpec,
    jobs: Option<usize>,
) -> Result<ExperimentResult> {
    regime.validate()?;
    score.validate()?;
    method.model.validate()?;
    if regime.regime.is_temporal() {
        regime.tau(dataset.graph.num_times())?;
    }
    let rep = dataset.representation(method.representation)?;
    let graph = PreparedGraph::new(&rep, &method.model)?;
    let fits = regime.fits();

    let work = || -> Vec<Result<FitOutput>> {
        (0..fits)
            .into_par_iter()
            .map(|f| run_fit(dataset, &graph, method, regime, score, f))
            .collect()
    };
    let outputs = match jobs {
        Some(j) => rayon::ThreadPoolBuilder::new()
            .num_threads(j.max(1))
            .build()
            .map_err(|e| Error::Aborted(format!("cannot start worker pool: {e}")))?
            .install(work),
        None => work(),
    };

    let mut records = Vec::with_capacity(fits);
    let mut instances = Vec::new();
    let mut scores = Vec::new();
    for out in outputs {
        let out = out?;
        records.push(out.record);
        for (inst, spec) in out.instances {
            instances.push(inst);
            scores.push(spec);
        }
    }
    let planned = fits * regime.permutations();
    let skipped = planned - instances.len();
    if skipped as f64 > regime.max_skip_fraction * planned as f64 {
        return Err(Error::Aborted(format!(
            "{skipped} of {planned} instances skipped after training divergence"
        )));
    }
    if instances.is_empty() {
        return Err(Error::Aborted("no conformal instance completed".into()));
    }
    let report = MetricsReport::from_instances(&method.name(), regime.regime.label(), &instances, skipped);
    Ok(ExperimentResult {
        report,
        instances,
        fits: records,
        scores,
    })
}
