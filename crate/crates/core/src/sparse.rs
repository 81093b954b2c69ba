//! Compressed-sparse-column storage.

use ndarray::{Array2, ArrayView2};

use crate::error::{Error, Result};

/// Sparse matrix in compressed-sparse-column layout.
///
/// Row indices within a column are strictly increasing and explicit zeros are
/// never stored.
#[derive(Debug, Clone, PartialEq)]
pub struct CscMatrix {
    nrows: usize,
    ncols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<f64>,
}

/// Borrowed view of one column.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ColumnView<'a> {
    pub len: usize,
    pub rows: &'a [usize],
    pub values: &'a [f64],
}

impl<'a> ColumnView<'a> {
    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + 'a {
        self.rows.iter().copied().zip(self.values.iter().copied())
    }

    pub fn nnz(&self) -> usize {
        self.rows.len()
    }

    pub fn is_zero(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn to_dense(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.len];
        for (r, v) in self.iter() {
            out[r] = v;
        }
        out
    }
}

impl CscMatrix {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Self {
            nrows,
            ncols,
            indptr: vec![0; ncols + 1],
            indices: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn identity(n: usize) -> Self {
        Self {
            nrows: n,
            ncols: n,
            indptr: (0..=n).collect(),
            indices: (0..n).collect(),
            values: vec![1.0; n],
        }
    }

    /// Builds a matrix from `(row, col, value)` triplets. Duplicate positions
    /// are summed; positions that sum to zero are dropped.
    pub fn from_triplets<I>(nrows: usize, ncols: usize, triplets: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize, f64)>,
    {
        let mut entries: Vec<(usize, usize, f64)> = triplets.into_iter().collect();
        for &(r, c, v) in &entries {
            if r >= nrows || c >= ncols {
                return Err(Error::DimensionMismatch(format!(
                    "entry ({r}, {c}) outside a {nrows}x{ncols} matrix"
                )));
            }
            if !v.is_finite() {
                return Err(Error::InvalidGraph(format!("non-finite entry at ({r}, {c})")));
            }
        }
        entries.sort_unstable_by_key(|&(r, c, _)| (c, r));

        let mut indptr = vec![0usize; ncols + 1];
        let mut indices = Vec::with_capacity(entries.len());
        let mut values = Vec::with_capacity(entries.len());
        let mut cols = Vec::with_capacity(entries.len());
        for (r, c, v) in entries {
            match (indices.last(), cols.last()) {
                (Some(&lr), Some(&lc)) if lr == r && lc == c => {
                    *values.last_mut().unwrap() += v;
                }
                _ => {
                    indices.push(r);
                    cols.push(c);
                    values.push(v);
                }
            }
        }
        let mut keep_idx = Vec::with_capacity(indices.len());
        let mut keep_val = Vec::with_capacity(values.len());
        for ((r, c), v) in indices.into_iter().zip(cols).zip(values) {
            if v != 0.0 {
                indptr[c + 1] += 1;
                keep_idx.push(r);
                keep_val.push(v);
            }
        }
        for c in 0..ncols {
            indptr[c + 1] += indptr[c];
        }
        Ok(Self {
            nrows,
            ncols,
            indptr,
            indices: keep_idx,
            values: keep_val,
        })
    }

    pub fn from_dense(dense: ArrayView2<'_, f64>) -> Result<Self> {
        let (r, c) = dense.dim();
        Self::from_triplets(
            r,
            c,
            dense
                .indexed_iter()
                .filter(|(_, &v)| v != 0.0)
                .map(|((i, j), &v)| (i, j, v)),
        )
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.nrows, self.ncols)
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn indptr(&self) -> &[usize] {
        &self.indptr
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn column(&self, j: usize) -> ColumnView<'_> {
        let (a, b) = (self.indptr[j], self.indptr[j + 1]);
        ColumnView {
            len: self.nrows,
            rows: &self.indices[a..b],
            values: &self.values[a..b],
        }
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let col = self.column(j);
        match col.rows.binary_search(&i) {
            Ok(k) => col.values[k],
            Err(_) => 0.0,
        }
    }

    /// Iterates stored entries as `(row, col, value)` in column-major order.
    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.ncols).flat_map(move |c| self.column(c).iter().map(move |(r, v)| (r, c, v)))
    }

    pub fn transpose(&self) -> Self {
        let mut counts = vec![0usize; self.nrows + 1];
        for &r in &self.indices {
            counts[r + 1] += 1;
        }
        for r in 0..self.nrows {
            counts[r + 1] += counts[r];
        }
        let indptr = counts.clone();
        let mut next = counts;
        let mut indices = vec![0usize; self.nnz()];
        let mut values = vec![0.0; self.nnz()];
        for c in 0..self.ncols {
            for (r, v) in self.column(c).iter() {
                let slot = next[r];
                indices[slot] = c;
                values[slot] = v;
                next[r] += 1;
            }
        }
        Self {
            nrows: self.ncols,
            ncols: self.nrows,
            indptr,
            indices,
            values,
        }
    }

    /// Exact structural and numerical symmetry.
    pub fn is_symmetric(&self) -> bool {
        self.nrows == self.ncols && *self == self.transpose()
    }

    /// Applies `f` to every stored value.
    pub fn map_values(&self, mut f: impl FnMut(usize, usize, f64) -> f64) -> Self {
        let mut out = self.clone();
        for c in 0..self.ncols {
            for k in self.indptr[c]..self.indptr[c + 1] {
                out.values[k] = f(self.indices[k], c, self.values[k]);
            }
        }
        out
    }

    /// Symmetric relabelling `Q A Qᵀ` where `new_of_old[i]` is the new index
    /// of row/column `i`.
    pub fn permute_symmetric(&self, new_of_old: &[usize]) -> Result<Self> {
        if self.nrows != self.ncols || new_of_old.len() != self.nrows {
            return Err(Error::DimensionMismatch(
                "symmetric permutation needs a square matrix and a full-length permutation".into(),
            ));
        }
        Self::from_triplets(
            self.nrows,
            self.ncols,
            self.triplets()
                .map(|(r, c, v)| (new_of_old[r], new_of_old[c], v)),
        )
    }

    pub fn to_dense(&self) -> Array2<f64> {
        let mut out = Array2::zeros((self.nrows, self.ncols));
        for (r, c, v) in self.triplets() {
            out[[r, c]] = v;
        }
        out
    }

    /// `Aᵀ · x` for a dense row-major `x` with `nrows` rows.
    ///
    /// Each output row gathers over one stored column, so for a symmetric
    /// matrix this is also `A · x`.
    pub fn transpose_mul_dense(&self, x: ArrayView2<'_, f64>) -> Array2<f64> {
        assert_eq!(x.nrows(), self.nrows, "operand row count");
        let width = x.ncols();
        let x = x.as_standard_layout();
        let xs = x.as_slice().expect("standard layout");
        let mut out = vec![0.0; self.ncols * width];
        for c in 0..self.ncols {
            let dst = &mut out[c * width..(c + 1) * width];
            for k in self.indptr[c]..self.indptr[c + 1] {
                let v = self.values[k];
                let src = &xs[self.indices[k] * width..(self.indices[k] + 1) * width];
                for (d, s) in dst.iter_mut().zip(src) {
                    *d += v * s;
                }
            }
        }
        Array2::from_shape_vec((self.ncols, width), out).expect("shape")
    }

    /// `A · x` for a dense row-major `x` with `ncols` rows.
    pub fn mul_dense(&self, x: ArrayView2<'_, f64>) -> Array2<f64> {
        assert_eq!(x.nrows(), self.ncols, "operand row count");
        let width = x.ncols();
        let x = x.as_standard_layout();
        let xs = x.as_slice().expect("standard layout");
        let mut out = vec![0.0; self.nrows * width];
        for c in 0..self.ncols {
            let src = &xs[c * width..(c + 1) * width];
            for k in self.indptr[c]..self.indptr[c + 1] {
                let v = self.values[k];
                let r = self.indices[k];
                for (d, s) in out[r * width..(r + 1) * width].iter_mut().zip(src) {
                    *d += v * s;
                }
            }
        }
        Array2::from_shape_vec((self.nrows, width), out).expect("shape")
    }
}
