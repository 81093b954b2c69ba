//! Adam training with validation early stopping.

use ndarray::Array2;

use super::config::ModelConfig;
use super::model::{cross_entropy, forward, loss_and_grads, PreparedGraph, TrainingMask};
use super::params::ModelParams;
use crate::error::{Error, Result};
use crate::graph::{LabelTable, NodeTimeIndex, Role};
use crate::representation::{split_embedding, EmbeddingMatrix, Representation};
use crate::rng;

const BETA1: f64 = 0.9;
const BETA2: f64 = 0.999;
const EPS: f64 = 1e-8;

struct Adam {
    lr: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    step: i32,
}

impl Adam {
    fn new(lr: f64, size: usize) -> Self {
        Self {
            lr,
            m: vec![0.0; size],
            v: vec![0.0; size],
            step: 0,
        }
    }

    fn update(&mut self, params: &mut ModelParams, grads: &ModelParams) {
        self.step += 1;
        let c1 = 1.0 - BETA1.powi(self.step);
        let c2 = 1.0 - BETA2.powi(self.step);
        let mut k = 0;
        for (p, g) in params.slices_mut().into_iter().zip(grads.slices()) {
            for (pv, &gv) in p.iter_mut().zip(g) {
                let m = &mut self.m[k];
                let v = &mut self.v[k];
                *m = BETA1 * *m + (1.0 - BETA1) * gv;
                *v = BETA2 * *v + (1.0 - BETA2) * gv * gv;
                *pv -= self.lr * (*m / c1) / ((*v / c2).sqrt() + EPS);
                k += 1;
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Parameters at the epoch with the lowest validation loss.
    pub params: ModelParams,
    pub logits: Array2<f64>,
    pub embedding: EmbeddingMatrix,
    pub epochs_run: usize,
    pub best_epoch: usize,
    pub best_val_loss: f64,
    pub final_train_loss: f64,
}

/// Fits a model on the training pairs of `index`, early stopping on the
/// validation pairs.
pub fn train(rep: &Representation, labels: &LabelTable, index: &NodeTimeIndex, config: &ModelConfig) -> Result<TrainOutcome> {
    let graph = PreparedGraph::new(rep, config)?;
    let train_mask = TrainingMask::from_index(index, labels, &rep.layout, Role::Training)?;
    let val_mask = TrainingMask::from_index(index, labels, &rep.layout, Role::Validation)?;
    let out = train_prepared(&graph, &train_mask, &val_mask, labels.d(), config)?;
    let embedding = split_embedding(out.logits.clone(), rep)?;
    Ok(TrainOutcome {
        params: out.params,
        logits: out.logits,
        embedding,
        epochs_run: out.epochs_run,
        best_epoch: out.best_epoch,
        best_val_loss: out.best_val_loss,
        final_train_loss: out.final_train_loss,
    })
}

#[derive(Debug, Clone)]
pub struct PreparedOutcome {
    pub params: ModelParams,
    pub logits: Array2<f64>,
    pub epochs_run: usize,
    pub best_epoch: usize,
    pub best_val_loss: f64,
    pub final_train_loss: f64,
}

/// Training loop over an already prepared graph.
///
/// Initialization draws from stream 0 of `config.seed` and dropout from
/// stream 1, so a seed fixes the whole run.
pub fn train_prepared(
    graph: &PreparedGraph,
    train_mask: &TrainingMask,
    val_mask: &TrainingMask,
    classes: usize,
    config: &ModelConfig,
) -> Result<PreparedOutcome> {
    config.validate()?;
    if train_mask.role() != Role::Training {
        return Err(Error::RoleViolation(train_mask.role()));
    }
    if val_mask.role() != Role::Validation {
        return Err(Error::RoleViolation(val_mask.role()));
    }
    if classes == 0 {
        return Err(Error::Empty("class set"));
    }
    let dims = graph.layer_dims(config, classes);
    let mut init_rng = rng::stream(config.seed, 0);
    let mut params = ModelParams::init(config.architecture, &dims, config.seed, &mut init_rng);
    let mut drop_rng = rng::stream(config.seed, 1);
    let mut adam = Adam::new(config.learning_rate, params.num_values());

    let mut best = params.clone();
    let mut best_val = f64::INFINITY;
    let mut best_epoch = 0;
    let mut since_best = 0;
    let mut epochs_run = 0;
    let mut train_loss = f64::NAN;
    for epoch in 0..config.max_epochs {
        let (loss, grads) = loss_and_grads(&params, graph, train_mask, config, Some(&mut drop_rng))?;
        if !loss.is_finite() || !grads.is_finite() {
            return Err(Error::Diverged { epoch, loss });
        }
        train_loss = loss;
        adam.update(&mut params, &grads);
        epochs_run = epoch + 1;

        let val = cross_entropy(&forward(&params, graph)?, val_mask);
        if !val.is_finite() {
            return Err(Error::Diverged { epoch, loss: val });
        }
        if val < best_val {
            best_val = val;
            best = params.clone();
            best_epoch = epoch + 1;
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= config.patience {
                break;
            }
        }
    }
    log::debug!("trained {epochs_run} epochs, best validation loss {best_val:.4} at epoch {best_epoch}");
    let logits = forward(&best, graph)?;
    Ok(PreparedOutcome {
        params: best,
        logits,
        epochs_run,
        best_epoch,
        best_val_loss: best_val,
        final_train_loss: train_loss,
    })
}
