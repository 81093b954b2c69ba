//! Dynamic stochastic block models.
//!
//! Snapshot `t` is drawn as `A_ij ~ Bernoulli(B^(t)[z_i, z_j])` independently
//! for `i ≤ j` (self-loops included) and mirrored. Each snapshot uses its own
//! ChaCha20 stream `t` under the spec seed, so snapshots can be sampled in any
//! order and still reproduce bit-for-bit.

use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{DynamicGraph, LabelTable};
use crate::rng;
use crate::sparse::CscMatrix;

/// Nodes in the three-community presets.
pub const PAPER_SBM_NODES: usize = 300;
/// Nodes in the two-community, two-snapshot example.
pub const TWO_BLOCK_NODES: usize = 200;

const SBM_OFF_DIAGONAL: f64 = 0.02;
const SBM_STATES: [f64; 2] = [0.08, 0.16];
const IID_SBM_DIAGONAL: [f64; 3] = [0.16, 0.08, 0.16];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DsbmSpec {
    pub n: usize,
    pub num_times: usize,
    pub num_communities: usize,
    /// Community of each node.
    pub communities: Vec<usize>,
    /// One `K × K` matrix of edge probabilities per time point.
    pub probabilities: Vec<Vec<Vec<f64>>>,
    pub seed: u64,
}

/// Contiguous equal blocks; when `K` does not divide `n` the remainder is
/// dealt out round-robin.
pub fn equal_communities(n: usize, k: usize) -> Vec<usize> {
    let size = n / k;
    (0..n)
        .map(|i| if i < size * k { i / size.max(1) } else { (i - size * k) % k })
        .collect()
}

impl DsbmSpec {
    pub fn validate(&self) -> Result<()> {
        let k = self.num_communities;
        if self.communities.len() != self.n {
            return Err(Error::config("dataset.dsbm.communities", "length must equal n"));
        }
        if let Some(&z) = self.communities.iter().find(|&&z| z >= k) {
            return Err(Error::config(
                "dataset.dsbm.communities",
                format!("community {z} out of range for K = {k}"),
            ));
        }
        if self.probabilities.len() != self.num_times || self.num_times == 0 {
            return Err(Error::config(
                "dataset.dsbm.probabilities",
                "need one matrix per time point and at least one time point",
            ));
        }
        #[allow(clippy::needless_range_loop)]
        for (t, b) in self.probabilities.iter().enumerate() {
            if b.len() != k || b.iter().any(|row| row.len() != k) {
                return Err(Error::config("dataset.dsbm.probabilities", format!("matrix {t} is not {k}x{k}")));
            }
            for i in 0..k {
                for j in 0..k {
                    let v = b[i][j];
                    if !(0.0..=1.0).contains(&v) {
                        return Err(Error::config(
                            "dataset.dsbm.probabilities",
                            format!("matrix {t} entry ({i},{j}) = {v} is not a probability"),
                        ));
                    }
                    if v != b[j][i] {
                        return Err(Error::config(
                            "dataset.dsbm.probabilities",
                            format!("matrix {t} is not symmetric"),
                        ));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn class_names(&self) -> Vec<String> {
        (0..self.num_communities).map(|c| format!("c{c}")).collect()
    }
}

/// Samples the graph and the static community labels.
pub fn sample_dsbm(spec: &DsbmSpec) -> Result<(DynamicGraph, LabelTable)> {
    spec.validate()?;
    let n = spec.n;
    let z = &spec.communities;
    let snapshots = spec
        .probabilities
        .iter()
        .enumerate()
        .map(|(t, b)| {
            let mut rng = rng::stream(spec.seed, t as u64);
            let mut trip = Vec::new();
            for i in 0..n {
                for j in i..n {
                    if rng.random::<f64>() < b[z[i]][z[j]] {
                        trip.push((i, j, 1.0));
                        if i != j {
                            trip.push((j, i, 1.0));
                        }
                    }
                }
            }
            CscMatrix::from_triplets(n, n, trip)
        })
        .collect::<Result<Vec<_>>>()?;
    let graph = DynamicGraph::new(snapshots, false, false)?;
    let labels = LabelTable::from_static(z, spec.num_times, spec.class_names())?;
    Ok((graph, labels))
}

fn diagonal_matrix(diag: &[f64], off: f64) -> Vec<Vec<f64>> {
    (0..diag.len())
        .map(|i| (0..diag.len()).map(|j| if i == j { diag[i] } else { off }).collect())
        .collect()
}

/// Three communities of 100 nodes over eight snapshots; each snapshot uses a
/// distinct combination of within-community probabilities from {0.08, 0.16}
/// (off-diagonal 0.02), in an order shuffled by `seed`.
pub fn make_paper_sbm(seed: u64) -> DsbmSpec {
    let mut states: Vec<[f64; 3]> = Vec::with_capacity(8);
    for &a in &SBM_STATES {
        for &b in &SBM_STATES {
            for &c in &SBM_STATES {
                states.push([a, b, c]);
            }
        }
    }
    let mut order_rng = rng::stream(rng::derive_seed(seed, &[0x5b_u64]), 0);
    states.shuffle(&mut order_rng);
    DsbmSpec {
        n: PAPER_SBM_NODES,
        num_times: states.len(),
        num_communities: 3,
        communities: equal_communities(PAPER_SBM_NODES, 3),
        probabilities: states.iter().map(|s| diagonal_matrix(s, SBM_OFF_DIAGONAL)).collect(),
        seed,
    }
}

/// The drift-free variant: every snapshot uses the same `B`.
pub fn make_iid_sbm(seed: u64, num_times: usize) -> Result<DsbmSpec> {
    if num_times == 0 {
        return Err(Error::config("dataset.num_times", "must be at least 1"));
    }
    let b = diagonal_matrix(&IID_SBM_DIAGONAL, SBM_OFF_DIAGONAL);
    Ok(DsbmSpec {
        n: PAPER_SBM_NODES,
        num_times,
        num_communities: 3,
        communities: equal_communities(PAPER_SBM_NODES, 3),
        probabilities: vec![b; num_times],
        seed,
    })
}

/// Two communities, two i.i.d. snapshots with `B = [[0.5, 0.5], [0.5, 0.9]]`.
pub fn make_two_block_example(seed: u64) -> DsbmSpec {
    make_two_block_with_nodes(seed, TWO_BLOCK_NODES)
}

pub fn make_two_block_with_nodes(seed: u64, n: usize) -> DsbmSpec {
    let b = vec![vec![0.5, 0.5], vec![0.5, 0.9]];
    DsbmSpec {
        n,
        num_times: 2,
        num_communities: 2,
        communities: equal_communities(n, 2),
        probabilities: vec![b.clone(), b],
        seed,
    }
}
