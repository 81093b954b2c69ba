//! Static-graph representations of a dynamic graph.
//!
//! The dilated unfolding stacks `p` global nodes and `nT` temporal nodes into
//! one symmetric `(p + nT) × (p + nT)` matrix
//!
//! ```text
//!     [ 0    𝒜 ]          𝒜 = (A^(1), …, A^(T))   (p × nT)
//!     [ 𝒜ᵀ   0 ]
//! ```
//!
//! while the block-diagonal baseline places each snapshot in its own diagonal
//! block. Temporal rows are time-major in both: pair `(i, t)` lives at row
//! `offset + t·n + i`, where the offset is `p` for the unfolding and `0` for
//! the block-diagonal matrix.

use ndarray::{Array2, ArrayView1};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{AttributeMode, AttributeTable, DynamicGraph, NodeTimePair};
use crate::sparse::CscMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RepresentationKind {
    Unfolded,
    BlockDiagonal,
}

impl RepresentationKind {
    pub fn label(self) -> &'static str {
        match self {
            RepresentationKind::Unfolded => "unfolded",
            RepresentationKind::BlockDiagonal => "block_diagonal",
        }
    }
}

/// What a row of a representation stands for.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RowRole {
    Global(usize),
    Temporal(NodeTimePair),
}

/// Row bookkeeping shared by representations and embeddings.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RowLayout {
    pub kind: RepresentationKind,
    pub p: usize,
    pub n: usize,
    pub num_times: usize,
}

impl RowLayout {
    pub fn global_rows(&self) -> usize {
        match self.kind {
            RepresentationKind::Unfolded => self.p,
            RepresentationKind::BlockDiagonal => 0,
        }
    }

    pub fn temporal_rows(&self) -> usize {
        self.n * self.num_times
    }

    pub fn len(&self) -> usize {
        self.global_rows() + self.temporal_rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn role(&self, row: usize) -> RowRole {
        let g = self.global_rows();
        if row < g {
            RowRole::Global(row)
        } else {
            let k = row - g;
            RowRole::Temporal(NodeTimePair::new(k % self.n, k / self.n))
        }
    }

    pub fn row_of(&self, pair: NodeTimePair) -> usize {
        self.global_rows() + pair.time * self.n + pair.node
    }
}

/// Node features of a representation.
#[derive(Debug, Clone, PartialEq)]
pub enum Features {
    /// One-hot rows; never materialized.
    Identity(usize),
    Dense(Array2<f64>),
}

impl Features {
    pub fn rows(&self) -> usize {
        match self {
            Features::Identity(n) => *n,
            Features::Dense(x) => x.nrows(),
        }
    }

    /// Input width seen by the first layer.
    pub fn dim(&self) -> usize {
        match self {
            Features::Identity(n) => *n,
            Features::Dense(x) => x.ncols(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Representation {
    pub matrix: CscMatrix,
    pub features: Features,
    pub layout: RowLayout,
    /// Set when a directed graph was symmetrized with `max(A, Aᵀ)`.
    pub symmetrized: bool,
}

impl Representation {
    pub fn kind(&self) -> RepresentationKind {
        self.layout.kind
    }

    pub fn len(&self) -> usize {
        self.layout.len()
    }

    pub fn is_empty(&self) -> bool {
        self.layout.is_empty()
    }

    pub fn with_features(mut self, features: Features) -> Result<Self> {
        if features.rows() != self.len() {
            return Err(Error::DimensionMismatch(format!(
                "features have {} rows for a representation of {} rows",
                features.rows(),
                self.len()
            )));
        }
        self.features = features;
        Ok(self)
    }
}

/// Dilated unfolding of `graph`, with identity features.
pub fn unfold(graph: &DynamicGraph) -> Representation {
    let layout = RowLayout {
        kind: RepresentationKind::Unfolded,
        p: graph.p(),
        n: graph.n(),
        num_times: graph.num_times(),
    };
    let mut trip = Vec::with_capacity(2 * graph.total_nnz());
    for (t, snap) in graph.snapshots().iter().enumerate() {
        for (j, i, v) in snap.triplets() {
            let temporal = layout.row_of(NodeTimePair::new(i, t));
            trip.push((j, temporal, v));
            trip.push((temporal, j, v));
        }
    }
    let n_rows = layout.len();
    let matrix = CscMatrix::from_triplets(n_rows, n_rows, trip).expect("unfolding entries are in range");
    Representation {
        matrix,
        features: Features::Identity(n_rows),
        layout,
        symmetrized: false,
    }
}

/// Snapshots on the diagonal of an `nT × nT` matrix, with identity features.
///
/// Directed graphs are rejected unless `symmetrize` is set, in which case
/// each snapshot is replaced by `max(A, Aᵀ)`.
pub fn block_diagonal(graph: &DynamicGraph, symmetrize: bool) -> Result<Representation> {
    if graph.p() != graph.n() {
        return Err(Error::DimensionMismatch(
            "the block-diagonal representation needs square snapshots".into(),
        ));
    }
    if graph.is_directed() && !symmetrize {
        return Err(Error::DirectedBlockDiagonal);
    }
    let layout = RowLayout {
        kind: RepresentationKind::BlockDiagonal,
        p: graph.p(),
        n: graph.n(),
        num_times: graph.num_times(),
    };
    let n = graph.n();
    let mut trip = Vec::with_capacity(2 * graph.total_nnz());
    for (t, snap) in graph.snapshots().iter().enumerate() {
        let off = t * n;
        if graph.is_directed() {
            // Pattern of A + Aᵀ; values are replaced by the elementwise maximum.
            let pattern = CscMatrix::from_triplets(n, n, snap.triplets().chain(snap.transpose().triplets()))?;
            for (r, c, _) in pattern.triplets() {
                trip.push((off + r, off + c, snap.get(r, c).max(snap.get(c, r))));
            }
        } else {
            trip.extend(snap.triplets().map(|(r, c, v)| (off + r, off + c, v)));
        }
    }
    let n_rows = layout.len();
    Ok(Representation {
        matrix: CscMatrix::from_triplets(n_rows, n_rows, trip)?,
        features: Features::Identity(n_rows),
        layout,
        symmetrized: graph.is_directed(),
    })
}

/// Feature matrix for `rep` from per-pair attributes. Global rows of the
/// unfolding get zero vectors.
pub fn make_features(rep: &Representation, attrs: &AttributeTable) -> Result<Features> {
    let layout = rep.layout;
    if attrs.n() != layout.n || attrs.num_times() != layout.num_times {
        return Err(Error::DimensionMismatch(format!(
            "attributes cover n={}, T={} but the graph has n={}, T={}",
            attrs.n(),
            attrs.num_times(),
            layout.n,
            layout.num_times
        )));
    }
    match attrs.mode() {
        AttributeMode::Identity => Ok(Features::Identity(layout.len())),
        AttributeMode::Explicit => {
            let values = attrs.values().expect("explicit attributes carry values");
            let mut x = Array2::zeros((layout.len(), attrs.c()));
            let off = layout.global_rows();
            x.slice_mut(ndarray::s![off.., ..]).assign(values);
            Ok(Features::Dense(x))
        }
    }
}

/// `D̃^{-1/2} (A + I) D̃^{-1/2}` where `D̃` holds the weighted row sums of
/// `A + I`.
pub fn normalize_for_gcn(matrix: &CscMatrix) -> Result<CscMatrix> {
    let (r, c) = matrix.shape();
    if r != c {
        return Err(Error::DimensionMismatch("normalization needs a square matrix".into()));
    }
    let with_loops = CscMatrix::from_triplets(r, c, matrix.triplets().chain((0..r).map(|i| (i, i, 1.0))))?;
    // Symmetric, so column sums equal row sums.
    let inv_sqrt: Vec<f64> = (0..c)
        .map(|j| with_loops.column(j).values.iter().sum::<f64>().powf(-0.5))
        .collect();
    Ok(with_loops.map_values(|i, j, v| v * (inv_sqrt[i] * inv_sqrt[j])))
}

/// Model output split into global rows `Û` and temporal rows `V̂`.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    pub u_hat: Array2<f64>,
    pub v_hat: Array2<f64>,
    pub layout: RowLayout,
}

impl EmbeddingMatrix {
    /// Row of `V̂` for `pair`.
    pub fn row(&self, pair: NodeTimePair) -> ArrayView1<'_, f64> {
        self.v_hat.row(pair.time * self.layout.n + pair.node)
    }

    pub fn dim(&self) -> usize {
        self.v_hat.ncols()
    }

    /// Rows of `V̂` belonging to time `t`.
    pub fn time_slice(&self, t: usize) -> ndarray::ArrayView2<'_, f64> {
        let n = self.layout.n;
        self.v_hat.slice(ndarray::s![t * n..(t + 1) * n, ..])
    }
}

pub fn split_embedding(rows: Array2<f64>, rep: &Representation) -> Result<EmbeddingMatrix> {
    let layout = rep.layout;
    if rows.nrows() != layout.len() {
        return Err(Error::DimensionMismatch(format!(
            "embedding has {} rows for a representation of {} rows",
            rows.nrows(),
            layout.len()
        )));
    }
    if rows.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite {
            layer: 0,
            stage: "embedding split",
        });
    }
    let g = layout.global_rows();
    Ok(EmbeddingMatrix {
        u_hat: rows.slice(ndarray::s![..g, ..]).to_owned(),
        v_hat: rows.slice(ndarray::s![g.., ..]).to_owned(),
        layout,
    })
}
