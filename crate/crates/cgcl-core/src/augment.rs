//! Stochastic edge-set augmentation: complementary view splits and
//! uniform negative sampling.

use crate::error::{Error, Result};
use crate::graph::{build_adjacency, normalize_symmetric, CsrAdjacency, EdgeList, NodeId};
use rand::Rng;
use std::collections::HashSet;

/// Two edge-disjoint views whose union is the training edge set, with their
/// symmetrically normalized adjacencies prebuilt.
#[derive(Debug, Clone, PartialEq)]
pub struct ViewPair {
    pub view1: EdgeList,
    pub view2: EdgeList,
    pub adj1: CsrAdjacency,
    pub adj2: CsrAdjacency,
}

impl ViewPair {
    pub fn num_nodes(&self) -> usize {
        self.view1.num_nodes()
    }

    pub fn view(&self, v: usize) -> &EdgeList {
        match v {
            1 => &self.view1,
            2 => &self.view2,
            _ => panic!("view index must be 1 or 2, got {v}"),
        }
    }

    /// The view opposite `v` (1-based, as in the training loop).
    pub fn other(&self, v: usize) -> &EdgeList {
        self.view(3 - v)
    }

    pub fn adj(&self, v: usize) -> &CsrAdjacency {
        match v {
            1 => &self.adj1,
            2 => &self.adj2,
            _ => panic!("view index must be 1 or 2, got {v}"),
        }
    }
}

/// Assign every edge independently to view 1 with probability 1/2, else
/// view 2. The two views partition the input exactly; either may be empty.
pub fn bernoulli_split(edges: &EdgeList, rng: &mut impl Rng) -> ViewPair {
    let n = edges.num_nodes();
    let mut first = Vec::new();
    let mut second = Vec::new();
    for pair in edges.iter() {
        if rng.random_bool(0.5) {
            first.push(pair);
        } else {
            second.push(pair);
        }
    }
    let view1 = EdgeList::from_sorted_canonical(n, first);
    let view2 = EdgeList::from_sorted_canonical(n, second);
    let adj1 = normalize_symmetric(&build_adjacency(&view1));
    let adj2 = normalize_symmetric(&build_adjacency(&view2));
    ViewPair {
        view1,
        view2,
        adj1,
        adj2,
    }
}

/// Draw `count` canonical node pairs uniformly at random, rejecting
/// self-pairs and anything in `exclude`. Draws are independent, so the
/// result may contain repeats; that is intended for per-epoch negatives.
/// Fails if the accept rate is so low that `100 * count` attempts are
/// consumed (e.g. near-complete graphs).
pub fn sample_negatives(
    count: usize,
    num_nodes: usize,
    exclude: &HashSet<(NodeId, NodeId)>,
    rng: &mut impl Rng,
) -> Result<Vec<(NodeId, NodeId)>> {
    if count == 0 {
        return Ok(Vec::new());
    }
    if num_nodes < 2 {
        return Err(Error::InvalidArgument(format!(
            "cannot sample node pairs from {num_nodes} node(s)"
        )));
    }
    let budget = count.saturating_mul(100);
    let mut out = Vec::with_capacity(count);
    let mut attempts = 0usize;
    while out.len() < count {
        if attempts >= budget {
            return Err(Error::NegativeSamplingExhausted {
                needed: count,
                attempts,
            });
        }
        attempts += 1;
        let a = rng.random_range(0..num_nodes);
        let b = rng.random_range(0..num_nodes);
        if a == b {
            continue;
        }
        let pair = (a.min(b), a.max(b));
        if exclude.contains(&pair) {
            continue;
        }
        out.push(pair);
    }
    Ok(out)
}
