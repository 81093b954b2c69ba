//! Full-graph forward pass, masked cross-entropy and its gradient.

use ndarray::{Array1, Array2, ArrayView1, Axis};
use rand::Rng as _;

use super::config::{Architecture, ModelConfig};
use super::layers::{AttentionGraph, Dropout, GatCache, GatLayer, GcnLayer, GraphLayer, LayerInput};
use super::params::{LayerParams, ModelParams};
use crate::error::{Error, Result};
use crate::graph::{LabelTable, NodeTimeIndex, Role};
use crate::representation::{normalize_for_gcn, Features, Representation, RowLayout};
use crate::rng::Rng;

/// Message-passing structure derived once per representation.
#[derive(Debug, Clone)]
pub enum Propagation {
    /// Normalized `D̃^{-1/2}(A + I)D̃^{-1/2}`.
    Gcn(crate::sparse::CscMatrix),
    /// Neighbourhoods of `A + I`.
    Gat(AttentionGraph),
}

/// A representation prepared for one architecture.
#[derive(Debug, Clone)]
pub struct PreparedGraph {
    pub propagation: Propagation,
    pub features: Features,
    pub layout: RowLayout,
    pub attention_slope: f64,
}

impl PreparedGraph {
    pub fn new(rep: &Representation, config: &ModelConfig) -> Result<Self> {
        let propagation = match config.architecture {
            Architecture::Gcn => Propagation::Gcn(normalize_for_gcn(&rep.matrix)?),
            Architecture::Gat => Propagation::Gat(AttentionGraph::from_adjacency(&rep.matrix)),
        };
        Ok(Self {
            propagation,
            features: rep.features.clone(),
            layout: rep.layout,
            attention_slope: config.attention_slope,
        })
    }

    pub fn architecture(&self) -> Architecture {
        match self.propagation {
            Propagation::Gcn(_) => Architecture::Gcn,
            Propagation::Gat(_) => Architecture::Gat,
        }
    }

    pub fn num_rows(&self) -> usize {
        self.features.rows()
    }

    /// Layer widths `[input, hidden, ..., classes]`.
    pub fn layer_dims(&self, config: &ModelConfig, classes: usize) -> Vec<usize> {
        let mut dims = vec![self.features.dim()];
        dims.extend(std::iter::repeat_n(config.hidden_dim, config.layers - 1));
        dims.push(classes);
        dims
    }

    fn input(&self) -> LayerInput<'_> {
        match &self.features {
            Features::Identity(n) => LayerInput::Identity(*n),
            Features::Dense(x) => LayerInput::Dense(x.view()),
        }
    }

    fn layer(&self) -> AnyLayer<'_> {
        match &self.propagation {
            Propagation::Gcn(a) => AnyLayer::Gcn(GcnLayer { propagation: a }),
            Propagation::Gat(g) => AnyLayer::Gat(GatLayer {
                graph: g,
                slope: self.attention_slope,
            }),
        }
    }
}

enum AnyLayer<'a> {
    Gcn(GcnLayer<'a>),
    Gat(GatLayer<'a>),
}

enum AnyCache {
    Gcn,
    Gat(GatCache),
}

impl AnyLayer<'_> {
    fn forward(&self, p: &LayerParams, x: LayerInput<'_>, d: Option<Dropout<'_>>) -> (Array2<f64>, AnyCache) {
        match self {
            AnyLayer::Gcn(l) => (l.forward(p, x, d).0, AnyCache::Gcn),
            AnyLayer::Gat(l) => {
                let (z, c) = l.forward(p, x, d);
                (z, AnyCache::Gat(c))
            }
        }
    }

    fn backward(
        &self,
        p: &LayerParams,
        x: LayerInput<'_>,
        cache: &AnyCache,
        g: &Array2<f64>,
        grads: &mut LayerParams,
        want_input: bool,
    ) -> Option<Array2<f64>> {
        match (self, cache) {
            (AnyLayer::Gcn(l), AnyCache::Gcn) => l.backward(p, x, &(), g, grads, want_input),
            (AnyLayer::Gat(l), AnyCache::Gat(c)) => l.backward(p, x, c, g, grads, want_input),
            _ => unreachable!("cache from a different layer type"),
        }
    }
}

/// Labeled rows a loss is computed over.
///
/// Only training and validation pairs can be turned into a mask, so a fit
/// has no path to calibration or test labels.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingMask {
    rows: Vec<usize>,
    labels: Vec<usize>,
    role: Role,
}

impl TrainingMask {
    pub fn from_index(index: &NodeTimeIndex, labels: &LabelTable, layout: &RowLayout, role: Role) -> Result<Self> {
        if !matches!(role, Role::Training | Role::Validation) {
            return Err(Error::RoleViolation(role));
        }
        let mut rows = Vec::new();
        let mut ys = Vec::new();
        for pair in index.with_role(role) {
            let y = labels.get(pair).ok_or_else(|| {
                Error::InvalidIndex(format!("pair ({}, {}) has no label", pair.node, pair.time))
            })?;
            rows.push(layout.row_of(pair));
            ys.push(y);
        }
        if rows.is_empty() {
            return Err(Error::Empty(match role {
                Role::Training => "training mask",
                _ => "validation mask",
            }));
        }
        Ok(Self { rows, labels: ys, role })
    }

    /// Mask over explicit `(row, label)` pairs, for synthetic setups.
    pub fn from_rows(rows: Vec<usize>, labels: Vec<usize>, role: Role) -> Result<Self> {
        if !matches!(role, Role::Training | Role::Validation) {
            return Err(Error::RoleViolation(role));
        }
        if rows.len() != labels.len() {
            return Err(Error::DimensionMismatch("mask rows and labels differ in length".into()));
        }
        if rows.is_empty() {
            return Err(Error::Empty("mask"));
        }
        Ok(Self { rows, labels, role })
    }

    /// The same mask with every entry repeated `times` times.
    pub fn repeated(&self, times: usize) -> Self {
        Self {
            rows: self.rows.iter().copied().cycle().take(self.rows.len() * times).collect(),
            labels: self.labels.iter().copied().cycle().take(self.labels.len() * times).collect(),
            role: self.role,
        }
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn role(&self) -> Role {
        self.role
    }

    pub fn rows(&self) -> &[usize] {
        &self.rows
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }
}

pub fn softmax(logits: ArrayView1<'_, f64>) -> Array1<f64> {
    let max = logits.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
    let mut e = logits.mapv(|v| (v - max).exp());
    let s = e.sum();
    e /= s;
    e
}

pub fn softmax_rows(logits: &Array2<f64>) -> Array2<f64> {
    let mut out = logits.clone();
    for mut row in out.rows_mut() {
        let p = softmax(row.view());
        row.assign(&p);
    }
    out
}

fn log_sum_exp(row: ArrayView1<'_, f64>) -> f64 {
    let max = row.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
    max + row.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// Mean cross-entropy of `logits` over the mask.
pub fn cross_entropy(logits: &Array2<f64>, mask: &TrainingMask) -> f64 {
    let total: f64 = mask
        .rows
        .iter()
        .zip(&mask.labels)
        .map(|(&r, &y)| log_sum_exp(logits.row(r)) - logits[[r, y]])
        .sum();
    total / mask.len() as f64
}

struct Trace {
    /// Input of every layer after the first (post activation and dropout).
    hidden: Vec<Array2<f64>>,
    /// Pre-activation outputs, kept for the ReLU mask.
    pre: Vec<Array2<f64>>,
    /// Inverted-dropout multipliers per hidden layer.
    drop: Vec<Option<Array2<f64>>>,
    caches: Vec<AnyCache>,
    logits: Array2<f64>,
}

fn check_finite(z: &Array2<f64>, layer: usize, stage: &'static str) -> Result<()> {
    if z.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite { layer, stage })
    }
}

fn run(params: &ModelParams, graph: &PreparedGraph, mut rng: Option<(&mut Rng, f64)>) -> Result<Trace> {
    if params.architecture != graph.architecture() {
        return Err(Error::DimensionMismatch(format!(
            "parameters are for {} but the graph was prepared for {}",
            params.architecture.label(),
            graph.architecture().label()
        )));
    }
    let first = params.layers.first().ok_or(Error::Empty("model layers"))?;
    if first.in_dim() != graph.features.dim() {
        return Err(Error::DimensionMismatch(format!(
            "first layer expects {} inputs but features have {}",
            first.in_dim(),
            graph.features.dim()
        )));
    }
    let layer = graph.layer();
    let last = params.layers.len() - 1;
    let mut trace = Trace {
        hidden: Vec::with_capacity(last),
        pre: Vec::with_capacity(last),
        drop: Vec::with_capacity(last),
        caches: Vec::with_capacity(last + 1),
        logits: Array2::zeros((0, 0)),
    };
    for (l, p) in params.layers.iter().enumerate() {
        let input = if l == 0 {
            graph.input()
        } else {
            LayerInput::Dense(trace.hidden[l - 1].view())
        };
        let dropout = rng.as_mut().map(|(r, rate)| Dropout { rng: r, rate: *rate });
        let (z, cache) = layer.forward(p, input, dropout);
        check_finite(&z, l, "forward")?;
        trace.caches.push(cache);
        if l == last {
            trace.logits = z;
        } else {
            let mut h = z.mapv(|v| v.max(0.0));
            let mask = match rng.as_mut() {
                Some((r, rate)) if *rate > 0.0 => {
                    let scale = 1.0 / (1.0 - *rate);
                    let m = Array2::from_shape_simple_fn(h.raw_dim(), || if r.random::<f64>() < *rate { 0.0 } else { scale });
                    h *= &m;
                    Some(m)
                }
                _ => None,
            };
            trace.pre.push(z);
            trace.drop.push(mask);
            trace.hidden.push(h);
        }
    }
    Ok(trace)
}

/// Eval-mode logits (no dropout), one row per representation row.
pub fn forward(params: &ModelParams, graph: &PreparedGraph) -> Result<Array2<f64>> {
    Ok(run(params, graph, None)?.logits)
}

/// Mean masked cross-entropy plus `(weight_decay / 2)·‖θ‖²`, with the exact
/// gradient of every parameter. Dropout is active when `rng` is given.
pub fn loss_and_grads(
    params: &ModelParams,
    graph: &PreparedGraph,
    mask: &TrainingMask,
    config: &ModelConfig,
    rng: Option<&mut Rng>,
) -> Result<(f64, ModelParams)> {
    if mask.is_empty() {
        return Err(Error::Empty("mask"));
    }
    let trace = run(params, graph, rng.map(|r| (r, config.dropout)))?;
    let logits = &trace.logits;
    let d = logits.ncols();
    if let Some(&y) = mask.labels.iter().find(|&&y| y >= d) {
        return Err(Error::LabelOutOfRange { label: y, d });
    }

    let inv = 1.0 / mask.len() as f64;
    let mut data_loss = 0.0;
    let mut grad = Array2::<f64>::zeros(logits.raw_dim());
    for (&r, &y) in mask.rows.iter().zip(&mask.labels) {
        let row = logits.row(r);
        data_loss += log_sum_exp(row) - row[y];
        let p = softmax(row);
        let mut g = grad.row_mut(r);
        g.scaled_add(inv, &p);
        g[y] -= inv;
    }
    let loss = data_loss * inv + 0.5 * config.weight_decay * params.squared_norm();

    let layer = graph.layer();
    let mut grads = params.zeros_like();
    for l in (0..params.layers.len()).rev() {
        let input = if l == 0 {
            graph.input()
        } else {
            LayerInput::Dense(trace.hidden[l - 1].view())
        };
        let d_input = layer.backward(&params.layers[l], input, &trace.caches[l], &grad, &mut grads.layers[l], l > 0);
        if l > 0 {
            let mut g = d_input.expect("dense input gradient");
            if let Some(m) = &trace.drop[l - 1] {
                g *= m;
            }
            g.zip_mut_with(&trace.pre[l - 1], |gv, &z| {
                if z <= 0.0 {
                    *gv = 0.0;
                }
            });
            grad = g;
        }
    }
    if config.weight_decay > 0.0 {
        for (g, p) in grads.slices_mut().into_iter().zip(params.slices()) {
            for (gv, pv) in g.iter_mut().zip(p) {
                *gv += config.weight_decay * pv;
            }
        }
    }
    Ok((loss, grads))
}

/// Row-wise argmax; ties go to the lowest class index.
pub fn argmax_rows(logits: &Array2<f64>) -> Vec<usize> {
    logits
        .axis_iter(Axis(0))
        .map(|row| {
            row.iter()
                .enumerate()
                .fold((0, f64::NEG_INFINITY), |best, (k, &v)| if v > best.1 { (k, v) } else { best })
                .0
        })
        .collect()
}
