//! Dataset loading, synthetic graph generation, and train/val/test splits.
//!
//! Citation datasets use the plain-text `.content`/`.cites` layout: content
//! rows are `<id>\t<feature_0..d-1>\t<label>`, cites rows are
//! `<cited_id>\t<citing_id>`. The generic format is a pair of TSV files,
//! `edges.tsv` (`<src>\t<dst>`, integer ids) and `features.tsv`
//! (`<node_id>\t<v_0>\t...\t<v_{d-1}>`).

use crate::dense::{DenseMatrix, FeatureMatrix};
use crate::error::{Error, Result};
use crate::graph::{EdgeList, NodeId};
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use std::collections::{HashMap, HashSet};
use std::io::Write;
use std::path::Path;

/// A loaded graph: features, canonical edges, and (for citation datasets)
/// class labels kept only for provenance.
#[derive(Debug, Clone)]
pub struct RawDataset {
    pub features: FeatureMatrix,
    pub edges: EdgeList,
    pub node_labels: Option<Vec<usize>>,
}

impl RawDataset {
    pub fn num_nodes(&self) -> usize {
        self.edges.num_nodes()
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn feature_dim(&self) -> usize {
        self.features.cols()
    }
}

/// Tallies of rows dropped while canonicalizing a citation file.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct CitationLoadStats {
    /// Citations referencing an id absent from the content file.
    pub skipped_unknown: usize,
    pub dropped_self_loops: usize,
    pub dropped_duplicates: usize,
}

fn parse_error(path: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.display().to_string(),
        line,
        message: message.into(),
    }
}

/// Load a citation dataset, remapping string ids to dense node ids in
/// first-appearance order of the content file. Citation direction is
/// discarded; duplicates and self-loops are dropped; citations to unknown
/// ids are skipped and tallied.
pub fn load_citation(content_path: &Path, cites_path: &Path) -> Result<RawDataset> {
    let (dataset, stats) = load_citation_with_stats(content_path, cites_path)?;
    if stats.skipped_unknown > 0 {
        log::warn!(
            "{}: skipped {} citation(s) referencing ids absent from {}",
            cites_path.display(),
            stats.skipped_unknown,
            content_path.display()
        );
    }
    Ok(dataset)
}

pub fn load_citation_with_stats(
    content_path: &Path,
    cites_path: &Path,
) -> Result<(RawDataset, CitationLoadStats)> {
    let content = std::fs::read_to_string(content_path)?;
    let mut id_of = HashMap::new();
    let mut label_of = HashMap::new();
    let mut feature_rows: Vec<Vec<f64>> = Vec::new();
    let mut labels = Vec::new();
    let mut dim = None;
    for (lineno, line) in content.lines().enumerate() {
        let line_id = lineno + 1;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() < 3 {
            return Err(parse_error(
                content_path,
                line_id,
                format!(
                    "expected id, features and label, got {} field(s)",
                    fields.len()
                ),
            ));
        }
        let id = fields[0];
        let label = fields[fields.len() - 1];
        let raw_features = &fields[1..fields.len() - 1];
        if let Some(d) = dim {
            if raw_features.len() != d {
                return Err(parse_error(
                    content_path,
                    line_id,
                    format!(
                        "feature dimension {} differs from {}",
                        raw_features.len(),
                        d
                    ),
                ));
            }
        } else {
            dim = Some(raw_features.len());
        }
        if id_of.contains_key(id) {
            return Err(parse_error(
                content_path,
                line_id,
                format!("duplicate id {id}"),
            ));
        }
        let mut row = Vec::with_capacity(raw_features.len());
        for field in raw_features {
            let v: f64 = field.parse().map_err(|_| {
                parse_error(
                    content_path,
                    line_id,
                    format!("invalid feature value {field:?}"),
                )
            })?;
            if !v.is_finite() {
                return Err(parse_error(
                    content_path,
                    line_id,
                    "non-finite feature value",
                ));
            }
            row.push(v);
        }
        id_of.insert(id.to_string(), feature_rows.len());
        feature_rows.push(row);
        let next_label = label_of.len();
        labels.push(*label_of.entry(label.to_string()).or_insert(next_label));
    }
    let n = feature_rows.len();
    if n == 0 {
        return Err(parse_error(content_path, 1, "empty content file"));
    }

    let cites = std::fs::read_to_string(cites_path)?;
    let mut stats = CitationLoadStats::default();
    let mut pairs = Vec::new();
    for (lineno, line) in cites.lines().enumerate() {
        let line_id = lineno + 1;
        if line.trim().is_empty() {
            continue;
        }
        let mut fields = line.split('\t');
        let (cited, citing) = match (fields.next(), fields.next()) {
            (Some(a), Some(b)) => (a.trim(), b.trim()),
            _ => {
                return Err(parse_error(
                    cites_path,
                    line_id,
                    "expected two tab-separated ids",
                ));
            }
        };
        match (id_of.get(cited), id_of.get(citing)) {
            (Some(&a), Some(&b)) => {
                if a == b {
                    stats.dropped_self_loops += 1;
                } else {
                    pairs.push(if a < b { (a, b) } else { (b, a) });
                }
            }
            _ => stats.skipped_unknown += 1,
        }
    }
    pairs.sort_unstable();
    let before = pairs.len();
    pairs.dedup();
    stats.dropped_duplicates = before - pairs.len();

    let dataset = RawDataset {
        features: DenseMatrix::from_rows(&feature_rows)?,
        edges: EdgeList::new(n, pairs)?,
        node_labels: Some(labels),
    };
    Ok((dataset, stats))
}

/// Load the generic two-file TSV format. Every node in `[0, n)` must have a
/// feature row; edges referencing other nodes are an error.
pub fn load_generic(edge_tsv: &Path, feature_tsv: &Path) -> Result<RawDataset> {
    let features_text = std::fs::read_to_string(feature_tsv)?;
    let mut rows: Vec<Option<Vec<f64>>> = Vec::new();
    let mut dim = None;
    let mut count = 0usize;
    for (lineno, line) in features_text.lines().enumerate() {
        let line_id = lineno + 1;
        if line.trim().is_empty() {
            continue;
        }
        let mut fields = line.split('\t');
        let id_field = fields.next().unwrap_or("");
        let node: usize = id_field.parse().map_err(|_| {
            parse_error(
                feature_tsv,
                line_id,
                format!("invalid node id {id_field:?}"),
            )
        })?;
        let mut row = Vec::new();
        for field in fields {
            let v: f64 = field.parse().map_err(|_| {
                parse_error(
                    feature_tsv,
                    line_id,
                    format!("invalid feature value {field:?}"),
                )
            })?;
            if !v.is_finite() {
                return Err(parse_error(
                    feature_tsv,
                    line_id,
                    "non-finite feature value",
                ));
            }
            row.push(v);
        }
        if let Some(d) = dim {
            if row.len() != d {
                return Err(parse_error(
                    feature_tsv,
                    line_id,
                    format!("feature dimension {} differs from {}", row.len(), d),
                ));
            }
        } else {
            dim = Some(row.len());
        }
        if node >= rows.len() {
            rows.resize(node + 1, None);
        }
        if rows[node].is_some() {
            return Err(parse_error(
                feature_tsv,
                line_id,
                format!("duplicate node id {node}"),
            ));
        }
        rows[node] = Some(row);
        count += 1;
    }
    if count == 0 {
        return Err(parse_error(feature_tsv, 1, "empty feature file"));
    }
    let n = rows.len();
    let mut feature_rows = Vec::with_capacity(n);
    for (node, row) in rows.into_iter().enumerate() {
        match row {
            Some(r) => feature_rows.push(r),
            None => {
                return Err(Error::InvalidArgument(format!(
                    "node {node} has no feature row in {}",
                    feature_tsv.display()
                )))
            }
        }
    }

    let edges_text = std::fs::read_to_string(edge_tsv)?;
    let mut pairs = Vec::new();
    for (lineno, line) in edges_text.lines().enumerate() {
        let line_id = lineno + 1;
        if line.trim().is_empty() {
            continue;
        }
        let mut fields = line.split('\t');
        let (a, b) = match (fields.next(), fields.next()) {
            (Some(a), Some(b)) => (a.trim(), b.trim()),
            _ => {
                return Err(parse_error(
                    edge_tsv,
                    line_id,
                    "expected two tab-separated ids",
                ))
            }
        };
        let src: usize = a
            .parse()
            .map_err(|_| parse_error(edge_tsv, line_id, format!("invalid node id {a:?}")))?;
        let dst: usize = b
            .parse()
            .map_err(|_| parse_error(edge_tsv, line_id, format!("invalid node id {b:?}")))?;
        if src >= n || dst >= n {
            return Err(Error::IndexOutOfRange {
                index: src.max(dst),
                num_nodes: n,
            });
        }
        pairs.push((src, dst));
    }

    Ok(RawDataset {
        features: DenseMatrix::from_rows(&feature_rows)?,
        edges: EdgeList::canonicalize(n, pairs)?,
        node_labels: None,
    })
}

/// Write a dataset back out in the generic format, canonical row order
/// (`load_generic(write_generic(d)) == d` byte-for-byte on canonical input).
pub fn write_generic(dataset: &RawDataset, edge_tsv: &Path, feature_tsv: &Path) -> Result<()> {
    let mut edges = Vec::new();
    for (src, dst) in dataset.edges.iter() {
        writeln!(edges, "{src}\t{dst}")?;
    }
    std::fs::write(edge_tsv, edges)?;

    let mut features = Vec::new();
    for i in 0..dataset.features.rows() {
        write!(features, "{i}")?;
        for v in dataset.features.row(i) {
            write!(features, "\t{v}")?;
        }
        writeln!(features)?;
    }
    std::fs::write(feature_tsv, features)?;
    Ok(())
}

/// Stochastic-block-model fixture: `num_blocks` blocks of `block_size` nodes,
/// within-block edge probability `p_in`, cross-block `p_out`. Features are a
/// one-hot block indicator padded to `feat_dim` with N(0, 0.01²) noise.
pub fn generate_sbm(
    num_blocks: usize,
    block_size: usize,
    p_in: f64,
    p_out: f64,
    feat_dim: usize,
    rng: &mut impl Rng,
) -> Result<RawDataset> {
    if !(0.0..=1.0).contains(&p_in) || !(0.0..=1.0).contains(&p_out) || p_out > p_in {
        return Err(Error::InvalidArgument(format!(
            "require 0 <= p_out <= p_in <= 1, got p_in={p_in}, p_out={p_out}"
        )));
    }
    if feat_dim < num_blocks {
        return Err(Error::InvalidArgument(format!(
            "feat_dim {feat_dim} smaller than num_blocks {num_blocks}"
        )));
    }
    if num_blocks == 0 || block_size == 0 {
        return Err(Error::InvalidArgument("empty block structure".into()));
    }
    let n = num_blocks * block_size;
    let mut pairs = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            let p = if i / block_size == j / block_size {
                p_in
            } else {
                p_out
            };
            if rng.random_bool(p) {
                pairs.push((i, j));
            }
        }
    }
    let noise = Normal::new(0.0, 0.01).expect("valid sigma");
    let mut features = DenseMatrix::zeros(n, feat_dim);
    for i in 0..n {
        let row = features.row_mut(i);
        row[i / block_size] = 1.0;
        for v in row.iter_mut().skip(num_blocks) {
            *v = noise.sample(rng);
        }
    }
    Ok(RawDataset {
        features,
        edges: EdgeList::new(n, pairs)?,
        node_labels: Some((0..n).map(|i| i / block_size).collect()),
    })
}

/// Masked training graph plus frozen positive/negative validation and test
/// edge sets.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetSplit {
    pub train_edges: EdgeList,
    pub val_pos: EdgeList,
    pub val_neg: EdgeList,
    pub test_pos: EdgeList,
    pub test_neg: EdgeList,
    pub num_nodes: usize,
}

impl DatasetSplit {
    /// Check the split invariants: the positives partition the original edge
    /// set, negative counts match positive counts, negatives avoid the graph
    /// and each other.
    pub fn validate(&self, original_edges: Option<&EdgeList>) -> Result<()> {
        let train: HashSet<_> = self.train_edges.to_set();
        let val: HashSet<_> = self.val_pos.to_set();
        let test: HashSet<_> = self.test_pos.to_set();
        if !train.is_disjoint(&val) || !train.is_disjoint(&test) || !val.is_disjoint(&test) {
            return Err(Error::InvalidArgument("positive sets overlap".into()));
        }
        let mut union: Vec<_> = train.iter().chain(&val).chain(&test).copied().collect();
        union.sort_unstable();
        if let Some(original) = original_edges {
            if union != original.as_slice() {
                return Err(Error::InvalidArgument(
                    "positives do not partition the original edge set".into(),
                ));
            }
        }
        if self.val_neg.len() != self.val_pos.len() || self.test_neg.len() != self.test_pos.len() {
            return Err(Error::InvalidArgument(
                "negative counts do not match".into(),
            ));
        }
        let all_pos: HashSet<_> = union.into_iter().collect();
        for (src, dst) in self.val_neg.iter().chain(self.test_neg.iter()) {
            if all_pos.contains(&(src, dst)) {
                return Err(Error::InvalidArgument(format!(
                    "negative ({src}, {dst}) is an edge of the graph"
                )));
            }
        }
        if !self.val_neg.to_set().is_disjoint(&self.test_neg.to_set()) {
            return Err(Error::InvalidArgument(
                "val_neg and test_neg overlap".into(),
            ));
        }
        Ok(())
    }
}

/// Mask `⌈test_frac·m⌉` test and `⌈val_frac·m⌉` validation positives chosen
/// uniformly without replacement, and sample matching counts of negatives by
/// rejection against the full edge set. Negatives are frozen here, once per
/// split.
pub fn split_edges(
    data: &RawDataset,
    val_frac: f64,
    test_frac: f64,
    rng: &mut impl Rng,
) -> Result<DatasetSplit> {
    if !(0.0..1.0).contains(&val_frac) || !(0.0..1.0).contains(&test_frac) {
        return Err(Error::InvalidArgument(
            "fractions must lie in [0, 1)".into(),
        ));
    }
    if val_frac + test_frac >= 1.0 {
        return Err(Error::InvalidArgument(format!(
            "val_frac + test_frac must be < 1, got {}",
            val_frac + test_frac
        )));
    }
    let n = data.num_nodes();
    let m = data.edges.len();
    let n_test = (test_frac * m as f64).ceil() as usize;
    let n_val = (val_frac * m as f64).ceil() as usize;
    if n_test + n_val > m {
        return Err(Error::InvalidArgument(format!(
            "split needs {} held-out edges but the graph only has {m}",
            n_test + n_val
        )));
    }

    let mut order: Vec<usize> = (0..m).collect();
    // Fisher-Yates
    for i in (1..m).rev() {
        let j = rng.random_range(0..=i);
        order.swap(i, j);
    }
    let edges = data.edges.as_slice();
    let pick = |idx: &[usize]| -> Vec<(NodeId, NodeId)> { idx.iter().map(|&i| edges[i]).collect() };
    let test_pos = EdgeList::new(n, pick(&order[..n_test]))?;
    let val_pos = EdgeList::new(n, pick(&order[n_test..n_test + n_val]))?;
    let train_edges = EdgeList::new(n, pick(&order[n_test + n_val..]))?;

    let full_set = data.edges.to_set();
    let mut taken = HashSet::new();
    let test_neg = sample_disconnected(n_test, n, &full_set, &mut taken, rng)?;
    let val_neg = sample_disconnected(n_val, n, &full_set, &mut taken, rng)?;

    let split = DatasetSplit {
        train_edges,
        val_pos,
        val_neg: EdgeList::new(n, val_neg)?,
        test_pos,
        test_neg: EdgeList::new(n, test_neg)?,
        num_nodes: n,
    };
    debug_assert!(split.validate(Some(&data.edges)).is_ok());
    Ok(split)
}

/// Rejection-sample `count` distinct canonical non-edges, also avoiding
/// `taken` (pairs claimed by an earlier call against the same split).
fn sample_disconnected(
    count: usize,
    num_nodes: usize,
    edge_set: &HashSet<(NodeId, NodeId)>,
    taken: &mut HashSet<(NodeId, NodeId)>,
    rng: &mut impl Rng,
) -> Result<Vec<(NodeId, NodeId)>> {
    let mut out = Vec::with_capacity(count);
    let budget = count.saturating_mul(100);
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
        if edge_set.contains(&pair) || taken.contains(&pair) {
            continue;
        }
        taken.insert(pair);
        out.push(pair);
    }
    Ok(out)
}

/// JSON split manifest: edge sets as `[src, dst]` pairs plus `num_nodes` and
/// the seed that produced the split.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SplitManifest {
    pub train: Vec<(NodeId, NodeId)>,
    pub val_pos: Vec<(NodeId, NodeId)>,
    pub val_neg: Vec<(NodeId, NodeId)>,
    pub test_pos: Vec<(NodeId, NodeId)>,
    pub test_neg: Vec<(NodeId, NodeId)>,
    pub num_nodes: usize,
    pub seed: u64,
}

impl SplitManifest {
    pub fn new(split: &DatasetSplit, seed: u64) -> Self {
        Self {
            train: split.train_edges.as_slice().to_vec(),
            val_pos: split.val_pos.as_slice().to_vec(),
            val_neg: split.val_neg.as_slice().to_vec(),
            test_pos: split.test_pos.as_slice().to_vec(),
            test_neg: split.test_neg.as_slice().to_vec(),
            num_nodes: split.num_nodes,
            seed,
        }
    }

    pub fn to_split(&self) -> Result<DatasetSplit> {
        let n = self.num_nodes;
        let split = DatasetSplit {
            train_edges: EdgeList::new(n, self.train.clone())?,
            val_pos: EdgeList::new(n, self.val_pos.clone())?,
            val_neg: EdgeList::new(n, self.val_neg.clone())?,
            test_pos: EdgeList::new(n, self.test_pos.clone())?,
            test_neg: EdgeList::new(n, self.test_neg.clone())?,
            num_nodes: n,
        };
        split.validate(None)?;
        Ok(split)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }
}
