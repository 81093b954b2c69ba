//! Graph layers with explicit reverse-mode gradients.
//!
//! A layer maps an `N × in` input to an `N × out` output over a fixed graph.
//! Identity features are never materialized: for a one-hot input the
//! projection `X W` is `W` itself and `∂L/∂W` is `∂L/∂(XW)`.

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::Rng as _;

use super::params::LayerParams;
use crate::rng::Rng;
use crate::sparse::CscMatrix;

/// Input of a layer.
#[derive(Debug, Clone, Copy)]
pub enum LayerInput<'a> {
    /// One-hot rows of an `N × N` identity.
    Identity(usize),
    Dense(ArrayView2<'a, f64>),
}

impl LayerInput<'_> {
    pub fn rows(&self) -> usize {
        match self {
            LayerInput::Identity(n) => *n,
            LayerInput::Dense(x) => x.nrows(),
        }
    }

    fn project(&self, weight: &Array2<f64>) -> Array2<f64> {
        match self {
            LayerInput::Identity(_) => weight.clone(),
            LayerInput::Dense(x) => x.dot(weight),
        }
    }

    /// Accumulates `∂L/∂W` from `∂L/∂(XW)` and returns `∂L/∂X` when the input
    /// is dense and `want_input` is set.
    fn project_backward(
        &self,
        weight: &Array2<f64>,
        d_proj: &Array2<f64>,
        d_weight: &mut Array2<f64>,
        want_input: bool,
    ) -> Option<Array2<f64>> {
        match self {
            LayerInput::Identity(_) => {
                *d_weight += d_proj;
                None
            }
            LayerInput::Dense(x) => {
                *d_weight += &x.t().dot(d_proj);
                want_input.then(|| d_proj.dot(&weight.t()))
            }
        }
    }
}

/// Dropout applied inside a layer during training.
pub struct Dropout<'r> {
    pub rng: &'r mut Rng,
    pub rate: f64,
}

/// A message-passing layer.
///
/// `backward` adds parameter gradients into `grads` and returns the gradient
/// with respect to a dense input when `want_input` is set.
pub trait GraphLayer {
    type Cache;

    fn forward(
        &self,
        params: &LayerParams,
        input: LayerInput<'_>,
        dropout: Option<Dropout<'_>>,
    ) -> (Array2<f64>, Self::Cache);

    fn backward(
        &self,
        params: &LayerParams,
        input: LayerInput<'_>,
        cache: &Self::Cache,
        grad_out: &Array2<f64>,
        grads: &mut LayerParams,
        want_input: bool,
    ) -> Option<Array2<f64>>;
}

/// `Z = Â X W + b` with a fixed propagation matrix `Â`.
pub struct GcnLayer<'a> {
    pub propagation: &'a CscMatrix,
}

impl GraphLayer for GcnLayer<'_> {
    type Cache = ();

    fn forward(&self, params: &LayerParams, input: LayerInput<'_>, _dropout: Option<Dropout<'_>>) -> (Array2<f64>, ()) {
        let xw = input.project(&params.weight);
        let mut z = self.propagation.mul_dense(xw.view());
        z += &params.bias;
        (z, ())
    }

    fn backward(
        &self,
        params: &LayerParams,
        input: LayerInput<'_>,
        _cache: &(),
        grad_out: &Array2<f64>,
        grads: &mut LayerParams,
        want_input: bool,
    ) -> Option<Array2<f64>> {
        grads.bias += &grad_out.sum_axis(Axis(0));
        let d_xw = self.propagation.transpose_mul_dense(grad_out.view());
        input.project_backward(&params.weight, &d_xw, &mut grads.weight, want_input)
    }
}

/// Row-compressed neighbourhoods (self-loop included) for attention.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionGraph {
    indptr: Vec<usize>,
    indices: Vec<usize>,
}

impl AttentionGraph {
    /// Neighbourhoods of the symmetric pattern of `adjacency` plus self-loops.
    /// Edge weights are ignored.
    pub fn from_adjacency(adjacency: &CscMatrix) -> Self {
        let n = adjacency.nrows();
        let mut indptr = Vec::with_capacity(n + 1);
        let mut indices = Vec::with_capacity(adjacency.nnz() + n);
        indptr.push(0);
        // Column i of a symmetric matrix lists the neighbours of row i.
        for i in 0..n {
            let col = adjacency.column(i);
            let mut placed_self = false;
            for &j in col.rows {
                if !placed_self && j >= i {
                    indices.push(i);
                    placed_self = true;
                }
                if j != i {
                    indices.push(j);
                }
            }
            if !placed_self {
                indices.push(i);
            }
            indptr.push(indices.len());
        }
        Self { indptr, indices }
    }

    pub fn num_nodes(&self) -> usize {
        self.indptr.len() - 1
    }

    pub fn num_edges(&self) -> usize {
        self.indices.len()
    }

    pub fn neighbours(&self, i: usize) -> &[usize] {
        &self.indices[self.indptr[i]..self.indptr[i + 1]]
    }
}

/// Single-head graph attention:
/// `e_ij = LeakyReLU(a_dst·(XW)_i + a_src·(XW)_j)`, `α_i· = softmax(e_i·)`
/// over the neighbourhood of `i`, and `Z_i = Σ_j α_ij (XW)_j + b`.
pub struct GatLayer<'a> {
    pub graph: &'a AttentionGraph,
    pub slope: f64,
}

pub struct GatCache {
    proj: Array2<f64>,
    /// Pre-activation scores per edge.
    raw: Vec<f64>,
    /// Attention weights per edge before dropout.
    alpha: Vec<f64>,
    /// Dropout multipliers per edge (0 or 1/(1-rate)).
    keep: Option<Vec<f64>>,
}

impl GatLayer<'_> {
    fn leaky(&self, x: f64) -> f64 {
        if x > 0.0 {
            x
        } else {
            self.slope * x
        }
    }
}

impl GraphLayer for GatLayer<'_> {
    type Cache = GatCache;

    fn forward(&self, params: &LayerParams, input: LayerInput<'_>, dropout: Option<Dropout<'_>>) -> (Array2<f64>, GatCache) {
        let att_src = params.att_src.as_ref().expect("attention layer needs att_src");
        let att_dst = params.att_dst.as_ref().expect("attention layer needs att_dst");
        let proj = input.project(&params.weight);
        let src = proj.dot(att_src);
        let dst = proj.dot(att_dst);
        let n = self.graph.num_nodes();
        let width = proj.ncols();

        let mut raw = vec![0.0; self.graph.num_edges()];
        let mut alpha = vec![0.0; self.graph.num_edges()];
        for i in 0..n {
            let range = self.graph.indptr[i]..self.graph.indptr[i + 1];
            let mut max = f64::NEG_INFINITY;
            for k in range.clone() {
                raw[k] = dst[i] + src[self.graph.indices[k]];
                max = max.max(self.leaky(raw[k]));
            }
            let mut total = 0.0;
            for k in range.clone() {
                alpha[k] = (self.leaky(raw[k]) - max).exp();
                total += alpha[k];
            }
            for k in range {
                alpha[k] /= total;
            }
        }

        let keep = dropout.filter(|d| d.rate > 0.0).map(|d| {
            let scale = 1.0 / (1.0 - d.rate);
            (0..alpha.len())
                .map(|_| if d.rng.random::<f64>() < d.rate { 0.0 } else { scale })
                .collect::<Vec<_>>()
        });

        let ps = proj.as_slice().expect("standard layout");
        let mut out = vec![0.0; n * width];
        for i in 0..n {
            let dst_row = &mut out[i * width..(i + 1) * width];
            for k in self.graph.indptr[i]..self.graph.indptr[i + 1] {
                let a = alpha[k] * keep.as_ref().map_or(1.0, |m| m[k]);
                if a == 0.0 {
                    continue;
                }
                let j = self.graph.indices[k];
                for (o, p) in dst_row.iter_mut().zip(&ps[j * width..(j + 1) * width]) {
                    *o += a * p;
                }
            }
        }
        let mut z = Array2::from_shape_vec((n, width), out).expect("shape");
        z += &params.bias;
        (z, GatCache { proj, raw, alpha, keep })
    }

    fn backward(
        &self,
        params: &LayerParams,
        input: LayerInput<'_>,
        cache: &GatCache,
        grad_out: &Array2<f64>,
        grads: &mut LayerParams,
        want_input: bool,
    ) -> Option<Array2<f64>> {
        let att_src = params.att_src.as_ref().expect("att_src");
        let att_dst = params.att_dst.as_ref().expect("att_dst");
        grads.bias += &grad_out.sum_axis(Axis(0));

        let n = self.graph.num_nodes();
        let width = cache.proj.ncols();
        let ps = cache.proj.as_slice().expect("standard layout");
        let g = grad_out.as_standard_layout();
        let gs = g.as_slice().expect("standard layout");

        let mut d_proj = vec![0.0; n * width];
        let mut d_src = Array1::<f64>::zeros(n);
        let mut d_dst = Array1::<f64>::zeros(n);
        let mut d_alpha = Vec::new();
        for i in 0..n {
            let range = self.graph.indptr[i]..self.graph.indptr[i + 1];
            let gi = &gs[i * width..(i + 1) * width];
            d_alpha.clear();
            for k in range.clone() {
                let j = self.graph.indices[k];
                let pj = &ps[j * width..(j + 1) * width];
                let mult = cache.keep.as_ref().map_or(1.0, |m| m[k]);
                let a = cache.alpha[k] * mult;
                let dot: f64 = gi.iter().zip(pj).map(|(x, y)| x * y).sum();
                d_alpha.push(dot * mult);
                if a != 0.0 {
                    for (d, x) in d_proj[j * width..(j + 1) * width].iter_mut().zip(gi) {
                        *d += a * x;
                    }
                }
            }
            let weighted: f64 = range.clone().zip(&d_alpha).map(|(k, da)| cache.alpha[k] * da).sum();
            for (k, da) in range.zip(&d_alpha) {
                let d_e = cache.alpha[k] * (da - weighted);
                let d_raw = if cache.raw[k] > 0.0 { d_e } else { self.slope * d_e };
                d_dst[i] += d_raw;
                d_src[self.graph.indices[k]] += d_raw;
            }
        }
        let mut d_proj = Array2::from_shape_vec((n, width), d_proj).expect("shape");
        if let Some(g) = grads.att_src.as_mut() {
            *g += &cache.proj.t().dot(&d_src);
        }
        if let Some(g) = grads.att_dst.as_mut() {
            *g += &cache.proj.t().dot(&d_dst);
        }
        let d_src_col = d_src.insert_axis(Axis(1));
        let d_dst_col = d_dst.insert_axis(Axis(1));
        d_proj += &(&d_src_col * &att_src.view().insert_axis(Axis(0)));
        d_proj += &(&d_dst_col * &att_dst.view().insert_axis(Axis(0)));
        input.project_backward(&params.weight, &d_proj, &mut grads.weight, want_input)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn attention_graph_adds_self_loops_once() {
        let a = CscMatrix::from_dense(array![[1.0, 1.0, 0.0], [1.0, 0.0, 1.0], [0.0, 1.0, 0.0]].view()).unwrap();
        let g = AttentionGraph::from_adjacency(&a);
        assert_eq!(g.neighbours(0), &[0, 1]);
        assert_eq!(g.neighbours(1), &[0, 1, 2]);
        assert_eq!(g.neighbours(2), &[1, 2]);
    }

    #[test]
    fn attention_rows_are_convex_combinations() {
        let a = CscMatrix::from_dense(array![[0.0, 1.0, 1.0], [1.0, 0.0, 0.0], [1.0, 0.0, 0.0]].view()).unwrap();
        let g = AttentionGraph::from_adjacency(&a);
        let layer = GatLayer { graph: &g, slope: 0.2 };
        let params = LayerParams {
            weight: array![[1.0], [2.0], [3.0]],
            bias: array![0.0],
            att_src: Some(array![0.5]),
            att_dst: Some(array![-0.3]),
        };
        let (z, cache) = layer.forward(&params, LayerInput::Identity(3), None);
        for i in 0..3 {
            let s: f64 = cache.alpha[g.indptr[i]..g.indptr[i + 1]].iter().sum();
            assert!((s - 1.0).abs() < 1e-12);
        }
        // Node 1 attends to {0, 1} only, so its output lies between 1 and 2.
        assert!(z[[1, 0]] > 1.0 && z[[1, 0]] < 2.0);
    }
}
