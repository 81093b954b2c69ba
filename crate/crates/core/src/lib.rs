//! Conformal node classification on dynamic graphs.
//!
//! A dynamic graph is turned into one static graph (the dilated unfolding or
//! the block-diagonal baseline), a graph neural network produces per-pair
//! logits, and split conformal calibration turns those into prediction sets
//! with marginal coverage guarantees.

pub mod conformal;
pub mod config;
pub mod error;
pub mod evaluation;
pub mod generators;
pub mod gnn;
pub mod graph;
pub mod ingestion;
pub mod representation;
pub mod rng;
pub mod sparse;
pub mod stats;

pub use error::{Error, Result};
pub use graph::{
    apply_permutation, validate_index, validate_pairs, AttributeMode, AttributeTable, DynamicGraph, IndexPermutation,
    IndexReport, LabelTable, NodeTimeIndex, NodeTimePair, Role,
};
pub use representation::{
    block_diagonal, make_features, normalize_for_gcn, split_embedding, unfold, EmbeddingMatrix, Features,
    Representation, RepresentationKind, RowLayout,
};
