//! Core graph data structures: canonical undirected edge lists, symmetric CSR
//! adjacency, degree-based normalization, and the sparse-dense product.

use crate::dense::{axpy, DenseMatrix};
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::collections::HashSet;

/// Dense node identifier in `[0, n)`.
pub type NodeId = usize;

/// Canonical undirected edge set: every stored pair has `src < dst`, no
/// duplicates, no self-loops. Edges are kept sorted so that equal sets
/// compare equal.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EdgeList {
    edges: Vec<(NodeId, NodeId)>,
    num_nodes: usize,
}

impl EdgeList {
    /// Build from already-canonical pairs (`src < dst`, in bounds, no
    /// duplicates). Sorts the pairs; rejects anything non-canonical.
    pub fn new(num_nodes: usize, mut edges: Vec<(NodeId, NodeId)>) -> Result<Self> {
        if num_nodes == 0 && !edges.is_empty() {
            return Err(Error::InvalidArgument(
                "edge list with zero nodes cannot hold edges".into(),
            ));
        }
        for &(src, dst) in &edges {
            if src >= dst {
                return Err(Error::InvalidArgument(format!(
                    "non-canonical edge ({src}, {dst}): require src < dst"
                )));
            }
            if dst >= num_nodes {
                return Err(Error::IndexOutOfRange {
                    index: dst,
                    num_nodes,
                });
            }
        }
        edges.sort_unstable();
        if edges.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidArgument("duplicate edge".into()));
        }
        Ok(Self { edges, num_nodes })
    }

    /// Build from arbitrary pairs: orients each pair as `(min, max)`, drops
    /// self-loops and duplicates. Errors only on out-of-range endpoints.
    pub fn canonicalize(
        num_nodes: usize,
        pairs: impl IntoIterator<Item = (NodeId, NodeId)>,
    ) -> Result<Self> {
        let mut edges = Vec::new();
        for (a, b) in pairs {
            let (src, dst) = if a < b { (a, b) } else { (b, a) };
            if dst >= num_nodes {
                return Err(Error::IndexOutOfRange {
                    index: dst,
                    num_nodes,
                });
            }
            if src != dst {
                edges.push((src, dst));
            }
        }
        edges.sort_unstable();
        edges.dedup();
        Ok(Self { edges, num_nodes })
    }

    /// Internal constructor for pairs already known to be canonical and
    /// sorted (e.g. a filtered subset of an existing list).
    pub(crate) fn from_sorted_canonical(num_nodes: usize, edges: Vec<(NodeId, NodeId)>) -> Self {
        debug_assert!(edges.windows(2).all(|w| w[0] < w[1]));
        debug_assert!(edges.iter().all(|&(s, d)| s < d && d < num_nodes));
        Self { edges, num_nodes }
    }

    pub fn num_nodes(&self) -> usize {
        self.num_nodes
    }

    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    pub fn as_slice(&self) -> &[(NodeId, NodeId)] {
        &self.edges
    }

    pub fn iter(&self) -> impl Iterator<Item = (NodeId, NodeId)> + '_ {
        self.edges.iter().copied()
    }

    /// Membership set over canonical pairs.
    pub fn to_set(&self) -> HashSet<(NodeId, NodeId)> {
        self.edges.iter().copied().collect()
    }
}

/// Row sums of an adjacency matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DegreeVector {
    degrees: Vec<f64>,
}

impl DegreeVector {
    pub fn as_slice(&self) -> &[f64] {
        &self.degrees
    }
}

/// Symmetric adjacency in compressed sparse row form. Column indices are
/// sorted within each row; entry (i, j) is present iff (j, i) is, with equal
/// values.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrAdjacency {
    row_offsets: Vec<usize>,
    col_indices: Vec<NodeId>,
    values: Vec<f64>,
    num_nodes: usize,
}

impl CsrAdjacency {
    pub fn num_nodes(&self) -> usize {
        self.num_nodes
    }

    pub fn nnz(&self) -> usize {
        self.col_indices.len()
    }

    /// Column indices and values of row `i`.
    pub fn row(&self, i: usize) -> (&[NodeId], &[f64]) {
        let range = self.row_offsets[i]..self.row_offsets[i + 1];
        (&self.col_indices[range.clone()], &self.values[range])
    }

    pub fn degrees(&self) -> DegreeVector {
        DegreeVector {
            degrees: (0..self.num_nodes)
                .map(|i| self.row(i).1.iter().sum())
                .collect(),
        }
    }

    /// Recover the canonical edge list (upper-triangular structure).
    pub fn canonical_edges(&self) -> EdgeList {
        let mut edges = Vec::with_capacity(self.nnz() / 2);
        for i in 0..self.num_nodes {
            let (cols, _) = self.row(i);
            for &j in cols {
                if i < j {
                    edges.push((i, j));
                }
            }
        }
        EdgeList::from_sorted_canonical(self.num_nodes, edges)
    }
}

/// Symmetric unweighted adjacency from a canonical edge list: entries (i, j)
/// and (j, i) are set to 1.0 for every edge; no self-loops are stored.
pub fn build_adjacency(edges: &EdgeList) -> CsrAdjacency {
    let n = edges.num_nodes();
    let mut counts = vec![0usize; n + 1];
    for (src, dst) in edges.iter() {
        counts[src + 1] += 1;
        counts[dst + 1] += 1;
    }
    let mut row_offsets = counts;
    for i in 0..n {
        row_offsets[i + 1] += row_offsets[i];
    }
    let nnz = row_offsets[n];
    let mut col_indices = vec![0usize; nnz];
    let mut cursor = row_offsets.clone();
    // Edges are sorted by (src, dst), so per-row column lists come out sorted:
    // row src receives ascending dst values, and row dst receives ascending
    // src values because src is the faster-growing sorted key.
    for (src, dst) in edges.iter() {
        col_indices[cursor[src]] = dst;
        cursor[src] += 1;
    }
    for (src, dst) in edges.iter() {
        col_indices[cursor[dst]] = src;
        cursor[dst] += 1;
    }
    // The two passes above interleave: row i holds neighbors j > i first
    // (from the src pass) then j < i (from the dst pass). Sort each row.
    for i in 0..n {
        col_indices[row_offsets[i]..row_offsets[i + 1]].sort_unstable();
    }
    CsrAdjacency {
        values: vec![1.0; nnz],
        row_offsets,
        col_indices,
        num_nodes: n,
    }
}

/// Degree-normalized operator `D̃^{-1/2} (A + I) D̃^{-1/2}` where `D̃` is the
/// degree of `A + I`. The self-loop keeps every node's degree ≥ 1, so the
/// result is defined for isolated nodes too; each row's diagonal entry is
/// `1/d̃_i`.
pub fn normalize_symmetric(adj: &CsrAdjacency) -> CsrAdjacency {
    let n = adj.num_nodes;
    let inv_sqrt: Vec<f64> = (0..n)
        .map(|i| {
            let deg: f64 = adj.row(i).1.iter().sum::<f64>() + 1.0;
            1.0 / deg.sqrt()
        })
        .collect();

    let mut row_offsets = Vec::with_capacity(n + 1);
    let mut col_indices = Vec::with_capacity(adj.nnz() + n);
    let mut values = Vec::with_capacity(adj.nnz() + n);
    row_offsets.push(0);
    for i in 0..n {
        let (cols, vals) = adj.row(i);
        let mut inserted_diag = false;
        for (&j, &v) in cols.iter().zip(vals) {
            if !inserted_diag && j > i {
                col_indices.push(i);
                values.push(inv_sqrt[i] * inv_sqrt[i]);
                inserted_diag = true;
            }
            col_indices.push(j);
            values.push(inv_sqrt[i] * v * inv_sqrt[j]);
        }
        if !inserted_diag {
            col_indices.push(i);
            values.push(inv_sqrt[i] * inv_sqrt[i]);
        }
        row_offsets.push(col_indices.len());
    }
    CsrAdjacency {
        row_offsets,
        col_indices,
        values,
        num_nodes: n,
    }
}

/// Sparse-dense product `adj · dense`. Row i of the output accumulates
/// neighbor rows in ascending column order; single-threaded and
/// deterministic.
pub fn spmm(adj: &CsrAdjacency, dense: &DenseMatrix) -> Result<DenseMatrix> {
    if adj.num_nodes != dense.rows() {
        return Err(Error::DimensionMismatch(format!(
            "spmm: adjacency has {} nodes, dense matrix has {} rows",
            adj.num_nodes,
            dense.rows()
        )));
    }
    let mut out = DenseMatrix::zeros(dense.rows(), dense.cols());
    for i in 0..adj.num_nodes {
        let (cols, vals) = adj.row(i);
        let out_row = out.row_mut(i);
        for (&j, &v) in cols.iter().zip(vals) {
            axpy(out_row, v, dense.row(j));
        }
    }
    Ok(out)
}
