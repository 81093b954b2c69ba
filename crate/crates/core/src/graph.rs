//! Dynamic graphs, node/time index sets, labels, attributes and the
//! permutations that act on them.

use std::collections::{BTreeMap, HashMap, HashSet};

use ndarray::{Array2, ArrayView1};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sparse::{ColumnView, CscMatrix};

/// A node at a point in time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct NodeTimePair {
    pub node: usize,
    pub time: usize,
}

impl NodeTimePair {
    pub const fn new(node: usize, time: usize) -> Self {
        Self { node, time }
    }
}

/// Role of a node/time pair in one conformal run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Unassigned,
    Training,
    Validation,
    Calibration,
    Test,
}

impl Role {
    /// Calibration and test pairs occupy the leading `m` positions of an index.
    pub fn is_conformal(self) -> bool {
        matches!(self, Role::Calibration | Role::Test)
    }
}

/// A sequence of `T` sparse `p × n` snapshots over a fixed node set.
///
/// Entry `(j, i)` of snapshot `t` is the weight of the edge from `j` to `i`;
/// the column `A^(t)_i` is therefore what describes pair `(i, t)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DynamicGraph {
    snapshots: Vec<CscMatrix>,
    p: usize,
    n: usize,
    directed: bool,
    weighted: bool,
}

impl DynamicGraph {
    /// Validates and wraps a list of snapshots.
    ///
    /// Undirected graphs must be square with every snapshot exactly
    /// symmetric. Stored weights must be finite and positive.
    pub fn new(snapshots: Vec<CscMatrix>, directed: bool, weighted: bool) -> Result<Self> {
        let first = snapshots
            .first()
            .ok_or_else(|| Error::InvalidGraph("a dynamic graph needs at least one snapshot".into()))?;
        let (p, n) = first.shape();
        for (t, s) in snapshots.iter().enumerate() {
            if s.shape() != (p, n) {
                return Err(Error::InvalidGraph(format!(
                    "snapshot {t} is {}x{}, expected {p}x{n}",
                    s.nrows(),
                    s.ncols()
                )));
            }
            if let Some(v) = s.values().iter().find(|v| !(v.is_finite() && **v > 0.0)) {
                return Err(Error::InvalidGraph(format!(
                    "snapshot {t} stores weight {v}; weights must be finite and positive"
                )));
            }
            if !directed && !s.is_symmetric() {
                return Err(Error::InvalidGraph(format!(
                    "snapshot {t} of an undirected graph is not symmetric"
                )));
            }
        }
        Ok(Self {
            snapshots,
            p,
            n,
            directed,
            weighted,
        })
    }

    /// Builds a square graph from `(time, row, col, weight)` records.
    /// Repeated positions sum. No mirroring is applied.
    pub fn from_edges<I>(n: usize, num_times: usize, edges: I, directed: bool, weighted: bool) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize, usize, f64)>,
    {
        let mut per_time: Vec<Vec<(usize, usize, f64)>> = vec![Vec::new(); num_times];
        for (t, r, c, w) in edges {
            let slot = per_time.get_mut(t).ok_or_else(|| {
                Error::InvalidGraph(format!("edge at time {t} but the graph has {num_times} time points"))
            })?;
            slot.push((r, c, w));
        }
        let snapshots = per_time
            .into_iter()
            .map(|trip| CscMatrix::from_triplets(n, n, trip))
            .collect::<Result<Vec<_>>>()?;
        Self::new(snapshots, directed, weighted)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn num_times(&self) -> usize {
        self.snapshots.len()
    }

    pub fn is_directed(&self) -> bool {
        self.directed
    }

    pub fn is_weighted(&self) -> bool {
        self.weighted
    }

    pub fn snapshot(&self, t: usize) -> &CscMatrix {
        &self.snapshots[t]
    }

    pub fn snapshots(&self) -> &[CscMatrix] {
        &self.snapshots
    }

    pub fn total_nnz(&self) -> usize {
        self.snapshots.iter().map(CscMatrix::nnz).sum()
    }

    pub fn contains(&self, pair: NodeTimePair) -> bool {
        pair.node < self.n && pair.time < self.num_times()
    }

    fn check(&self, pair: NodeTimePair) -> Result<()> {
        if self.contains(pair) {
            Ok(())
        } else {
            Err(Error::PairOutOfBounds {
                pair,
                n: self.n,
                t: self.num_times(),
            })
        }
    }

    /// The column `A^(t)_i` of pair `(i, t)`, borrowed from the snapshot.
    pub fn column_of(&self, pair: NodeTimePair) -> Result<ColumnView<'_>> {
        self.check(pair)?;
        Ok(self.snapshots[pair.time].column(pair.node))
    }
}

/// Ordered node/time pairs with their roles.
///
/// The leading `m` positions hold exactly the calibration and test pairs;
/// training, validation and unassigned pairs follow.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NodeTimeIndex {
    pairs: Vec<NodeTimePair>,
    roles: Vec<Role>,
    m: usize,
}

/// Number of pairs per role.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct RoleCounts {
    pub unassigned: usize,
    pub training: usize,
    pub validation: usize,
    pub calibration: usize,
    pub test: usize,
}

impl NodeTimeIndex {
    /// Builds an index, moving calibration and test pairs to the front while
    /// keeping the relative order within each group.
    pub fn new(entries: Vec<(NodeTimePair, Role)>) -> Result<Self> {
        let mut seen = HashSet::with_capacity(entries.len());
        if let Some((dup, _)) = entries.iter().find(|(p, _)| !seen.insert(*p)) {
            return Err(Error::InvalidIndex(format!(
                "pair ({}, {}) appears more than once",
                dup.node, dup.time
            )));
        }
        let (front, back): (Vec<_>, Vec<_>) = entries.into_iter().partition(|(_, r)| r.is_conformal());
        let m = front.len();
        let (pairs, roles) = front.into_iter().chain(back).unzip();
        Ok(Self { pairs, roles, m })
    }

    pub fn unassigned(pairs: Vec<NodeTimePair>) -> Result<Self> {
        Self::new(pairs.into_iter().map(|p| (p, Role::Unassigned)).collect())
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// Number of calibration and test pairs.
    pub fn m(&self) -> usize {
        self.m
    }

    pub fn pairs(&self) -> &[NodeTimePair] {
        &self.pairs
    }

    pub fn roles(&self) -> &[Role] {
        &self.roles
    }

    pub fn iter(&self) -> impl Iterator<Item = (NodeTimePair, Role)> + '_ {
        self.pairs.iter().copied().zip(self.roles.iter().copied())
    }

    pub fn with_role(&self, role: Role) -> impl Iterator<Item = NodeTimePair> + '_ {
        self.iter().filter(move |(_, r)| *r == role).map(|(p, _)| p)
    }

    pub fn position_of(&self, pair: NodeTimePair) -> Option<usize> {
        self.pairs.iter().position(|&p| p == pair)
    }

    pub fn counts(&self) -> RoleCounts {
        let mut c = RoleCounts::default();
        for r in &self.roles {
            match r {
                Role::Unassigned => c.unassigned += 1,
                Role::Training => c.training += 1,
                Role::Validation => c.validation += 1,
                Role::Calibration => c.calibration += 1,
                Role::Test => c.test += 1,
            }
        }
        c
    }
}

/// Class labels of node/time pairs.
///
/// Global (time-free) nodes carry no label. Test labels are stored here for
/// evaluation; model fitting only sees labels through
/// [`crate::gnn::TrainingMask`], which refuses calibration and test pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelTable {
    n: usize,
    num_times: usize,
    labels: Vec<Option<usize>>,
    classes: Vec<String>,
}

impl LabelTable {
    pub fn new(n: usize, num_times: usize, classes: Vec<String>) -> Self {
        Self {
            n,
            num_times,
            labels: vec![None; n * num_times],
            classes,
        }
    }

    /// Every pair `(i, t)` gets the label `classes_of_node[i]`.
    pub fn from_static(classes_of_node: &[usize], num_times: usize, classes: Vec<String>) -> Result<Self> {
        let mut table = Self::new(classes_of_node.len(), num_times, classes);
        for t in 0..num_times {
            for (i, &y) in classes_of_node.iter().enumerate() {
                table.set(NodeTimePair::new(i, t), y)?;
            }
        }
        Ok(table)
    }

    fn slot(&self, pair: NodeTimePair) -> Option<usize> {
        (pair.node < self.n && pair.time < self.num_times).then(|| pair.time * self.n + pair.node)
    }

    pub fn set(&mut self, pair: NodeTimePair, class: usize) -> Result<()> {
        if class >= self.classes.len() {
            return Err(Error::LabelOutOfRange {
                label: class,
                d: self.classes.len(),
            });
        }
        let slot = self.slot(pair).ok_or(Error::PairOutOfBounds {
            pair,
            n: self.n,
            t: self.num_times,
        })?;
        self.labels[slot] = Some(class);
        Ok(())
    }

    pub fn clear(&mut self, pair: NodeTimePair) {
        if let Some(slot) = self.slot(pair) {
            self.labels[slot] = None;
        }
    }

    pub fn get(&self, pair: NodeTimePair) -> Option<usize> {
        self.slot(pair).and_then(|s| self.labels[s])
    }

    /// Number of classes `d`.
    pub fn d(&self) -> usize {
        self.classes.len()
    }

    pub fn class_names(&self) -> &[String] {
        &self.classes
    }

    pub fn rename_classes(&mut self, classes: Vec<String>) -> Result<()> {
        if classes.len() != self.classes.len() {
            return Err(Error::DimensionMismatch("class name count".into()));
        }
        self.classes = classes;
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn num_times(&self) -> usize {
        self.num_times
    }

    pub fn labeled_pairs(&self) -> impl Iterator<Item = (NodeTimePair, usize)> + '_ {
        self.labels.iter().enumerate().filter_map(move |(s, y)| {
            y.map(|y| (NodeTimePair::new(s % self.n, s / self.n), y))
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttributeMode {
    /// No stored vectors; each node of the representation gets a one-hot row.
    Identity,
    Explicit,
}

/// Per-pair attribute vectors of dimension `c`.
#[derive(Debug, Clone, PartialEq)]
pub struct AttributeTable {
    mode: AttributeMode,
    n: usize,
    num_times: usize,
    /// Time-major `nT × c`; row `t·n + i` holds `X^(t)_i`.
    values: Option<Array2<f64>>,
}

impl AttributeTable {
    pub fn identity(n: usize, num_times: usize) -> Self {
        Self {
            mode: AttributeMode::Identity,
            n,
            num_times,
            values: None,
        }
    }

    pub fn explicit(n: usize, num_times: usize, values: Array2<f64>) -> Result<Self> {
        if values.nrows() != n * num_times {
            return Err(Error::DimensionMismatch(format!(
                "attribute table has {} rows, expected n*T = {}",
                values.nrows(),
                n * num_times
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidGraph("non-finite attribute value".into()));
        }
        Ok(Self {
            mode: AttributeMode::Explicit,
            n,
            num_times,
            values: Some(values),
        })
    }

    pub fn mode(&self) -> AttributeMode {
        self.mode
    }

    /// Attribute dimension; `0` in identity mode.
    pub fn c(&self) -> usize {
        self.values.as_ref().map_or(0, |v| v.ncols())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn num_times(&self) -> usize {
        self.num_times
    }

    pub fn get(&self, pair: NodeTimePair) -> Option<ArrayView1<'_, f64>> {
        let v = self.values.as_ref()?;
        (pair.node < self.n && pair.time < self.num_times).then(|| v.row(pair.time * self.n + pair.node))
    }

    pub fn values(&self) -> Option<&Array2<f64>> {
        self.values.as_ref()
    }
}

/// A permutation `π` of the leading `m` positions of an index.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IndexPermutation {
    forward: Vec<usize>,
    inverse: Vec<usize>,
}

impl IndexPermutation {
    /// `forward[ℓ] = π(ℓ)`.
    pub fn new(forward: Vec<usize>) -> Result<Self> {
        let m = forward.len();
        let mut inverse = vec![usize::MAX; m];
        for (l, &img) in forward.iter().enumerate() {
            if img >= m {
                return Err(Error::InvalidPermutation {
                    m,
                    reason: format!("image {img} of position {l} is out of range"),
                });
            }
            if inverse[img] != usize::MAX {
                return Err(Error::InvalidPermutation {
                    m,
                    reason: format!("position {img} is hit twice"),
                });
            }
            inverse[img] = l;
        }
        Ok(Self { forward, inverse })
    }

    pub fn identity(m: usize) -> Self {
        Self {
            forward: (0..m).collect(),
            inverse: (0..m).collect(),
        }
    }

    pub fn m(&self) -> usize {
        self.forward.len()
    }

    pub fn apply(&self, l: usize) -> usize {
        self.forward[l]
    }

    pub fn apply_inverse(&self, l: usize) -> usize {
        self.inverse[l]
    }

    pub fn inverse(&self) -> Self {
        Self {
            forward: self.inverse.clone(),
            inverse: self.forward.clone(),
        }
    }
}

/// Output of [`apply_permutation`].
#[derive(Debug, Clone, PartialEq)]
pub struct Permuted {
    pub graph: DynamicGraph,
    pub index: NodeTimeIndex,
    pub labels: LabelTable,
    pub attributes: AttributeTable,
}

/// Moves the columns, labels and attributes of the leading `m` pairs:
/// position `ℓ < m` receives the data of position `π⁻¹(ℓ)`.
///
/// Overwriting columns of a symmetric snapshot generally breaks symmetry, so
/// the result of permuting an undirected graph is flagged directed unless
/// every snapshot happens to stay symmetric.
pub fn apply_permutation(
    graph: &DynamicGraph,
    index: &NodeTimeIndex,
    labels: &LabelTable,
    attrs: &AttributeTable,
    pi: &IndexPermutation,
) -> Result<Permuted> {
    let m = index.m();
    if m == 0 {
        return Err(Error::InvalidIndex("permutation needs at least one calibration/test pair".into()));
    }
    if pi.m() != m {
        return Err(Error::InvalidPermutation {
            m,
            reason: format!("permutation acts on {} positions", pi.m()),
        });
    }
    for p in &index.pairs()[..m] {
        graph.check(*p)?;
    }

    // (time, column) in the output -> (time, column) in the input.
    let mut source: HashMap<(usize, usize), NodeTimePair> = HashMap::with_capacity(m);
    for l in 0..m {
        let dst = index.pairs[l];
        let src = index.pairs[pi.apply_inverse(l)];
        source.insert((dst.time, dst.node), src);
    }

    let mut snapshots = Vec::with_capacity(graph.num_times());
    for t in 0..graph.num_times() {
        let mut trip = Vec::new();
        for col in 0..graph.n() {
            let from = source.get(&(t, col)).copied().unwrap_or(NodeTimePair::new(col, t));
            for (r, v) in graph.snapshot(from.time).column(from.node).iter() {
                trip.push((r, col, v));
            }
        }
        snapshots.push(CscMatrix::from_triplets(graph.p(), graph.n(), trip)?);
    }
    let directed = graph.is_directed() || !snapshots.iter().all(CscMatrix::is_symmetric);
    let new_graph = DynamicGraph::new(snapshots, directed, graph.is_weighted())?;

    let mut new_labels = labels.clone();
    let mut new_values = attrs.values.clone();
    for l in 0..m {
        let dst = index.pairs[l];
        let src = index.pairs[pi.apply_inverse(l)];
        match labels.get(src) {
            Some(y) => new_labels.set(dst, y)?,
            None => new_labels.clear(dst),
        }
        if let (Some(out), Some(inp)) = (new_values.as_mut(), attrs.values.as_ref()) {
            out.row_mut(dst.time * attrs.n + dst.node)
                .assign(&inp.row(src.time * attrs.n + src.node));
        }
    }
    Ok(Permuted {
        graph: new_graph,
        index: index.clone(),
        labels: new_labels,
        attributes: AttributeTable {
            values: new_values,
            ..attrs.clone()
        },
    })
}

/// Findings of [`validate_pairs`].
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct IndexReport {
    pub zero_columns: Vec<NodeTimePair>,
    pub duplicates: Vec<NodeTimePair>,
    pub out_of_bounds: Vec<NodeTimePair>,
    pub role_counts: BTreeMap<String, usize>,
}

impl IndexReport {
    pub fn is_clean(&self) -> bool {
        self.zero_columns.is_empty() && self.duplicates.is_empty() && self.out_of_bounds.is_empty()
    }
}

/// Checks a candidate list of pairs against the graph: columns with no
/// non-zero entry, repeated pairs and pairs outside the graph.
pub fn validate_pairs(graph: &DynamicGraph, entries: &[(NodeTimePair, Role)]) -> IndexReport {
    let mut report = IndexReport::default();
    let mut seen = HashSet::new();
    for &(pair, role) in entries {
        *report.role_counts.entry(format!("{role:?}").to_lowercase()).or_default() += 1;
        if !seen.insert(pair) {
            report.duplicates.push(pair);
            continue;
        }
        match graph.column_of(pair) {
            Ok(col) if col.is_zero() => report.zero_columns.push(pair),
            Ok(_) => {}
            Err(_) => report.out_of_bounds.push(pair),
        }
    }
    report
}

pub fn validate_index(graph: &DynamicGraph, index: &NodeTimeIndex) -> IndexReport {
    validate_pairs(graph, &index.iter().collect::<Vec<_>>())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pair(i: usize, t: usize) -> NodeTimePair {
        NodeTimePair::new(i, t)
    }

    fn single_edge() -> DynamicGraph {
        DynamicGraph::from_edges(2, 1, vec![(0, 0, 1, 1.0), (0, 1, 0, 1.0)], false, false).unwrap()
    }

    #[test]
    fn column_of_single_edge() {
        let g = single_edge();
        assert_eq!(g.column_of(pair(1, 0)).unwrap().to_dense(), vec![1.0, 0.0]);
        assert!(matches!(g.column_of(pair(2, 0)), Err(Error::PairOutOfBounds { .. })));
    }

    #[test]
    fn weighted_directed_column() {
        let g = DynamicGraph::from_edges(6, 2, vec![(1, 2, 5, 3.5)], true, true).unwrap();
        let col = g.column_of(pair(5, 1)).unwrap();
        assert_eq!(col.iter().collect::<Vec<_>>(), vec![(2, 3.5)]);
        assert!(g.column_of(pair(5, 0)).unwrap().is_zero());
    }

    #[test]
    fn undirected_graph_must_be_symmetric() {
        let err = DynamicGraph::from_edges(2, 1, vec![(0, 0, 1, 1.0)], false, false);
        assert!(matches!(err, Err(Error::InvalidGraph(_))));
    }

    #[test]
    fn index_puts_conformal_pairs_first() {
        let idx = NodeTimeIndex::new(vec![
            (pair(0, 0), Role::Training),
            (pair(1, 0), Role::Test),
            (pair(2, 0), Role::Validation),
            (pair(3, 0), Role::Calibration),
        ])
        .unwrap();
        assert_eq!(idx.m(), 2);
        assert_eq!(&idx.pairs()[..2], &[pair(1, 0), pair(3, 0)]);
        assert!(NodeTimeIndex::unassigned(vec![pair(0, 0), pair(0, 0)]).is_err());
    }

    #[test]
    fn permutation_must_be_bijective() {
        assert!(IndexPermutation::new(vec![0, 0]).is_err());
        assert!(IndexPermutation::new(vec![0, 2]).is_err());
        let p = IndexPermutation::new(vec![1, 2, 0]).unwrap();
        assert_eq!(p.apply_inverse(p.apply(2)), 2);
    }

    #[test]
    fn validate_flags_isolates_and_duplicates() {
        let g = DynamicGraph::from_edges(
            4,
            3,
            vec![(2, 0, 1, 1.0), (2, 1, 0, 1.0), (0, 2, 3, 1.0), (0, 3, 2, 1.0)],
            false,
            false,
        )
        .unwrap();
        let report = validate_pairs(&g, &[(pair(3, 2), Role::Test), (pair(0, 2), Role::Training)]);
        assert_eq!(report.zero_columns, vec![pair(3, 2)]);
        let clean = validate_pairs(&g, &[(pair(0, 2), Role::Test), (pair(3, 0), Role::Training)]);
        assert!(clean.is_clean());
        let dup = validate_pairs(&g, &[(pair(0, 2), Role::Test), (pair(0, 2), Role::Training)]);
        assert_eq!(dup.duplicates, vec![pair(0, 2)]);
        assert_eq!(dup.role_counts["test"], 1);
    }

    #[test]
    fn identity_permutation_is_noop() {
        let g = single_edge();
        let idx = NodeTimeIndex::new(vec![(pair(0, 0), Role::Calibration), (pair(1, 0), Role::Test)]).unwrap();
        let labels = LabelTable::from_static(&[0, 1], 1, vec!["a".into(), "b".into()]).unwrap();
        let attrs = AttributeTable::identity(2, 1);
        let out = apply_permutation(&g, &idx, &labels, &attrs, &IndexPermutation::identity(2)).unwrap();
        assert_eq!(out.graph, g);
        assert_eq!(out.labels, labels);
        assert_eq!(out.attributes, attrs);
        assert_eq!(out.index, idx);
    }
}
