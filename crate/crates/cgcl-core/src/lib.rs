//! Cross-view graph consistency learning for link prediction.
//!
//! An incomplete graph's training edges are split into two complementary
//! augmented views. A shared single-layer GCN encoder embeds the nodes of
//! each view, and a shared decoder (inner product followed by a small MLP)
//! reconstructs one view's edges from the other view's embeddings. Training
//! minimizes binary cross-entropy between each view and its cross-view
//! reconstruction; trained models score unseen node pairs for link
//! prediction, evaluated with AUC and average precision.

pub mod augment;
pub mod data;
pub mod dense;
pub mod error;
pub mod graph;
pub mod metrics;
pub mod model;
pub mod trainer;

pub use dense::{DenseMatrix, FeatureMatrix};
pub use error::{Error, Result};
pub use graph::{build_adjacency, normalize_symmetric, spmm, CsrAdjacency, EdgeList, NodeId};
