//! Python bindings over the core library: dataset loading and generation,
//! edge splits, training, scoring, checkpoints, and the ranking and
//! consistency metrics. Built as `cgcl_python`.

use std::path::PathBuf;

use cgcl_core::data::{self, DatasetSplit, RawDataset, SplitManifest};
use cgcl_core::metrics::{self as core_metrics, ConsistencyReport, ScoredEdges};
use cgcl_core::model::{load_checkpoint, save_checkpoint, AdamState, CheckpointData, ModelParams};
use cgcl_core::trainer::TrainConfig as CoreTrainConfig;
use cgcl_core::{trainer, EdgeList, Error, FeatureMatrix};
use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn err(e: Error) -> PyErr {
    match e {
        Error::Io(_) => PyIOError::new_err(e.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

fn pairs_of(list: &EdgeList) -> Vec<(usize, usize)> {
    list.as_slice().to_vec()
}

/// One epoch of history: `(epoch, loss_view1, loss_view2, val_auc, val_ap)`.
type HistoryRow = (usize, Option<f64>, Option<f64>, Option<f64>, Option<f64>);

/// A loaded graph: node features plus canonical undirected edges.
#[pyclass(name = "Dataset", module = "cgcl_python", skip_from_py_object)]
#[derive(Clone)]
pub struct PyDataset {
    inner: RawDataset,
}

#[pymethods]
impl PyDataset {
    /// Build a dataset from raw arrays. Edges may come in any orientation;
    /// self-loops and duplicates are dropped.
    #[new]
    fn new(
        num_nodes: usize,
        edges: Vec<(usize, usize)>,
        features: Vec<Vec<f64>>,
    ) -> PyResult<Self> {
        let edges = EdgeList::canonicalize(num_nodes, edges).map_err(err)?;
        let features = FeatureMatrix::from_rows(&features).map_err(err)?;
        if features.rows() != num_nodes {
            return Err(PyValueError::new_err(format!(
                "{} feature rows for {num_nodes} nodes",
                features.rows()
            )));
        }
        Ok(Self {
            inner: RawDataset {
                features,
                edges,
                node_labels: None,
            },
        })
    }

    #[getter]
    fn num_nodes(&self) -> usize {
        self.inner.num_nodes()
    }

    #[getter]
    fn num_edges(&self) -> usize {
        self.inner.num_edges()
    }

    #[getter]
    fn feature_dim(&self) -> usize {
        self.inner.feature_dim()
    }

    /// Canonical edge list as `(src, dst)` tuples with `src < dst`.
    fn edges(&self) -> Vec<(usize, usize)> {
        pairs_of(&self.inner.edges)
    }

    /// Feature matrix as a list of per-node rows.
    fn features(&self) -> Vec<Vec<f64>> {
        (0..self.inner.features.rows())
            .map(|i| self.inner.features.row(i).to_vec())
            .collect()
    }

    /// Class labels when the source format carried them, else None.
    fn node_labels(&self) -> Option<Vec<usize>> {
        self.inner.node_labels.clone()
    }

    /// Write the graph back out as edge / feature TSV files.
    fn save_generic(&self, edges_path: PathBuf, features_path: PathBuf) -> PyResult<()> {
        data::write_generic(&self.inner, &edges_path, &features_path).map_err(err)
    }

    fn __repr__(&self) -> String {
        format!(
            "Dataset(num_nodes={}, num_edges={}, feature_dim={})",
            self.inner.num_nodes(),
            self.inner.num_edges(),
            self.inner.feature_dim()
        )
    }
}

/// A frozen train/validation/test split of one dataset's edges.
#[pyclass(name = "Split", module = "cgcl_python", skip_from_py_object)]
#[derive(Clone)]
pub struct PySplit {
    inner: DatasetSplit,
    seed: u64,
}

#[pymethods]
impl PySplit {
    #[getter]
    fn num_nodes(&self) -> usize {
        self.inner.num_nodes
    }

    /// Seed the split was drawn with (stored in the manifest).
    #[getter]
    fn seed(&self) -> u64 {
        self.seed
    }

    fn train_edges(&self) -> Vec<(usize, usize)> {
        pairs_of(&self.inner.train_edges)
    }

    fn val_pos(&self) -> Vec<(usize, usize)> {
        pairs_of(&self.inner.val_pos)
    }

    fn val_neg(&self) -> Vec<(usize, usize)> {
        pairs_of(&self.inner.val_neg)
    }

    fn test_pos(&self) -> Vec<(usize, usize)> {
        pairs_of(&self.inner.test_pos)
    }

    fn test_neg(&self) -> Vec<(usize, usize)> {
        pairs_of(&self.inner.test_neg)
    }

    /// Re-check the split invariants, optionally against the dataset the
    /// split claims to partition.
    #[pyo3(signature = (dataset=None))]
    fn validate(&self, dataset: Option<PyRef<'_, PyDataset>>) -> PyResult<()> {
        let edges = dataset.as_ref().map(|d| &d.inner.edges);
        self.inner.validate(edges).map_err(err)
    }

    /// Write the split as a JSON manifest.
    fn save(&self, path: PathBuf) -> PyResult<()> {
        SplitManifest::new(&self.inner, self.seed)
            .save(&path)
            .map_err(err)
    }

    /// Load a JSON manifest and re-validate it.
    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        let manifest = SplitManifest::load(&path).map_err(err)?;
        let inner = manifest.to_split().map_err(err)?;
        Ok(Self {
            inner,
            seed: manifest.seed,
        })
    }

    fn __repr__(&self) -> String {
        format!(
            "Split(train={}, val={}, test={}, num_nodes={}, seed={})",
            self.inner.train_edges.len(),
            self.inner.val_pos.len(),
            self.inner.test_pos.len(),
            self.inner.num_nodes,
            self.seed
        )
    }
}

/// Training hyperparameters. Defaults mirror the command-line tool.
#[pyclass(name = "TrainConfig", module = "cgcl_python", skip_from_py_object)]
#[derive(Clone)]
pub struct PyTrainConfig {
    inner: CoreTrainConfig,
}

#[pymethods]
impl PyTrainConfig {
    #[new]
    #[pyo3(signature = (
        epochs = 800,
        lr = 1e-3,
        hidden_dim = 256,
        head = "dot",
        one_view_ablation = false,
        raw_adjacency = false,
        seed = 0,
        select_by_val = true,
    ))]
    #[allow(clippy::too_many_arguments)]
    fn new(
        epochs: usize,
        lr: f64,
        hidden_dim: usize,
        head: &str,
        one_view_ablation: bool,
        raw_adjacency: bool,
        seed: u64,
        select_by_val: bool,
    ) -> PyResult<Self> {
        let inner = CoreTrainConfig {
            epochs,
            lr,
            hidden_dim,
            head: head.parse().map_err(err)?,
            one_view_ablation,
            raw_adjacency,
            seed,
            select_by_val,
        };
        inner.validate().map_err(err)?;
        Ok(Self { inner })
    }

    #[getter]
    fn epochs(&self) -> usize {
        self.inner.epochs
    }

    #[getter]
    fn lr(&self) -> f64 {
        self.inner.lr
    }

    #[getter]
    fn hidden_dim(&self) -> usize {
        self.inner.hidden_dim
    }

    #[getter]
    fn head(&self) -> String {
        self.inner.head.to_string()
    }

    #[getter]
    fn one_view_ablation(&self) -> bool {
        self.inner.one_view_ablation
    }

    #[getter]
    fn raw_adjacency(&self) -> bool {
        self.inner.raw_adjacency
    }

    #[getter]
    fn seed(&self) -> u64 {
        self.inner.seed
    }

    #[getter]
    fn select_by_val(&self) -> bool {
        self.inner.select_by_val
    }

    fn __repr__(&self) -> String {
        let c = &self.inner;
        format!(
            "TrainConfig(epochs={}, lr={}, hidden_dim={}, head='{}', one_view_ablation={}, \
             raw_adjacency={}, seed={}, select_by_val={})",
            c.epochs,
            c.lr,
            c.hidden_dim,
            c.head,
            c.one_view_ablation,
            c.raw_adjacency,
            c.seed,
            c.select_by_val
        )
    }
}

/// A trained (or reloaded) model: parameters, optimizer state, and the seed
/// of the run that produced it.
#[pyclass(name = "Model", module = "cgcl_python")]
pub struct PyModel {
    params: ModelParams,
    adam: AdamState,
    seed: u64,
    raw_adjacency: bool,
    best_epoch: Option<usize>,
    history: Option<Vec<HistoryRow>>,
}

#[pymethods]
impl PyModel {
    #[getter]
    fn seed(&self) -> u64 {
        self.seed
    }

    #[getter]
    fn raw_adjacency(&self) -> bool {
        self.raw_adjacency
    }

    /// Epoch whose parameters were kept; None for reloaded checkpoints.
    #[getter]
    fn best_epoch(&self) -> Option<usize> {
        self.best_epoch
    }

    #[getter]
    fn hidden_dim(&self) -> usize {
        self.params.dims.hidden_dim
    }

    #[getter]
    fn in_dim(&self) -> usize {
        self.params.dims.in_dim
    }

    #[getter]
    fn head(&self) -> String {
        self.params.dims.head.to_string()
    }

    /// Per-epoch `(epoch, loss_view1, loss_view2, val_auc, val_ap)` rows
    /// from training; None for reloaded checkpoints.
    fn history(&self) -> Option<Vec<HistoryRow>> {
        self.history.clone()
    }

    /// AUC and AP on the split's test (or validation) pairs.
    #[pyo3(signature = (dataset, split, part = "test"))]
    fn evaluate(
        &self,
        py: Python<'_>,
        dataset: PyRef<'_, PyDataset>,
        split: PyRef<'_, PySplit>,
        part: &str,
    ) -> PyResult<(f64, f64)> {
        let (pos, neg) = match part {
            "test" => (&split.inner.test_pos, &split.inner.test_neg),
            "val" => (&split.inner.val_pos, &split.inner.val_neg),
            other => {
                return Err(PyValueError::new_err(format!(
                    "part must be 'test' or 'val', got {other:?}"
                )))
            }
        };
        let features = &dataset.inner.features;
        let train_edges = &split.inner.train_edges;
        py.detach(|| {
            trainer::evaluate(
                &self.params,
                features,
                train_edges,
                pos,
                neg,
                self.raw_adjacency,
            )
            .map_err(err)
        })
    }

    /// Predicted link probabilities for arbitrary node pairs, encoding from
    /// the split's training graph.
    fn score(
        &self,
        py: Python<'_>,
        dataset: PyRef<'_, PyDataset>,
        split: PyRef<'_, PySplit>,
        pairs: Vec<(usize, usize)>,
    ) -> PyResult<Vec<f64>> {
        let features = &dataset.inner.features;
        let train_edges = &split.inner.train_edges;
        py.detach(|| {
            trainer::score_pairs(
                &self.params,
                features,
                train_edges,
                &pairs,
                self.raw_adjacency,
            )
            .map_err(err)
        })
    }

    /// Cross-view consistency diagnostics over `pairs` (default: the
    /// split's test pairs), using this model's seed to draw the views.
    #[pyo3(signature = (dataset, split, pairs = None))]
    fn diagnostics<'py>(
        &self,
        py: Python<'py>,
        dataset: PyRef<'_, PyDataset>,
        split: PyRef<'_, PySplit>,
        pairs: Option<Vec<(usize, usize)>>,
    ) -> PyResult<Bound<'py, PyDict>> {
        let pairs = pairs.unwrap_or_else(|| {
            let mut all = pairs_of(&split.inner.test_pos);
            all.extend(pairs_of(&split.inner.test_neg));
            all
        });
        let features = &dataset.inner.features;
        let train_edges = &split.inner.train_edges;
        let diag = py.detach(|| {
            trainer::view_diagnostics(
                &self.params,
                features,
                train_edges,
                &pairs,
                self.seed,
                self.raw_adjacency,
            )
            .map_err(err)
        })?;
        let out = PyDict::new(py);
        out.set_item("views", report_dict(py, &diag.views)?)?;
        out.set_item("reconstructions", report_dict(py, &diag.reconstructions)?)?;
        out.set_item("view1_vs_recon1", report_dict(py, &diag.view1_vs_recon1)?)?;
        out.set_item("view2_vs_recon2", report_dict(py, &diag.view2_vs_recon2)?)?;
        Ok(out)
    }

    /// Write a JSON checkpoint (parameters, optimizer moments, seed).
    fn save(&self, path: PathBuf) -> PyResult<()> {
        let data = CheckpointData {
            params: self.params.clone(),
            adam: self.adam.clone(),
            seed: self.seed,
        };
        save_checkpoint(&data, &path).map_err(err)
    }

    /// Reload a checkpoint. `raw_adjacency` is not stored in checkpoints
    /// and must be re-supplied when it was used for training.
    #[staticmethod]
    #[pyo3(signature = (path, raw_adjacency = false))]
    fn load(path: PathBuf, raw_adjacency: bool) -> PyResult<Self> {
        let data = load_checkpoint(&path).map_err(err)?;
        Ok(Self {
            params: data.params,
            adam: data.adam,
            seed: data.seed,
            raw_adjacency,
            best_epoch: None,
            history: None,
        })
    }

    fn __repr__(&self) -> String {
        format!(
            "Model(in_dim={}, hidden_dim={}, head='{}', seed={})",
            self.params.dims.in_dim, self.params.dims.hidden_dim, self.params.dims.head, self.seed
        )
    }
}

fn report_dict<'py>(py: Python<'py>, r: &ConsistencyReport) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("c_value", r.c_value)?;
    d.set_item("lower_bound", r.lower_bound)?;
    d.set_item("upper_bound", r.upper_bound)?;
    d.set_item("within_bounds", r.within_bounds)?;
    Ok(d)
}

/// Load a citation dataset from `.content` / `.cites` files.
#[pyfunction]
fn load_citation(content_path: PathBuf, cites_path: PathBuf) -> PyResult<PyDataset> {
    let inner = data::load_citation(&content_path, &cites_path).map_err(err)?;
    Ok(PyDataset { inner })
}

/// Load a graph from edge / feature TSV files.
#[pyfunction]
fn load_generic(edge_tsv: PathBuf, feature_tsv: PathBuf) -> PyResult<PyDataset> {
    let inner = data::load_generic(&edge_tsv, &feature_tsv).map_err(err)?;
    Ok(PyDataset { inner })
}

/// Sample a stochastic block model graph with one-hot block features plus
/// noise, deterministically from `seed`.
#[pyfunction]
#[pyo3(signature = (num_blocks, block_size, p_in, p_out, feat_dim, seed = 0))]
fn generate_sbm(
    num_blocks: usize,
    block_size: usize,
    p_in: f64,
    p_out: f64,
    feat_dim: usize,
    seed: u64,
) -> PyResult<PyDataset> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let inner =
        data::generate_sbm(num_blocks, block_size, p_in, p_out, feat_dim, &mut rng).map_err(err)?;
    Ok(PyDataset { inner })
}

/// Mask test/validation positives and freeze matching negatives,
/// deterministically from `seed`.
#[pyfunction]
#[pyo3(signature = (dataset, val_frac = 0.05, test_frac = 0.10, seed = 0))]
fn split_edges(
    dataset: PyRef<'_, PyDataset>,
    val_frac: f64,
    test_frac: f64,
    seed: u64,
) -> PyResult<PySplit> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let inner = data::split_edges(&dataset.inner, val_frac, test_frac, &mut rng).map_err(err)?;
    Ok(PySplit { inner, seed })
}

/// Train on the split's training graph and return the selected model.
#[pyfunction]
#[pyo3(signature = (dataset, split, config = None))]
fn train(
    py: Python<'_>,
    dataset: PyRef<'_, PyDataset>,
    split: PyRef<'_, PySplit>,
    config: Option<PyRef<'_, PyTrainConfig>>,
) -> PyResult<PyModel> {
    let config = config.map(|c| c.inner).unwrap_or_default();
    let features = &dataset.inner.features;
    let inner_split = &split.inner;
    let trained = py.detach(|| trainer::train(inner_split, features, &config).map_err(err))?;
    let history = trained
        .log
        .records
        .iter()
        .map(|r| (r.epoch, r.loss_view1, r.loss_view2, r.val_auc, r.val_ap))
        .collect();
    Ok(PyModel {
        params: trained.params,
        adam: trained.adam,
        seed: config.seed,
        raw_adjacency: config.raw_adjacency,
        best_epoch: Some(trained.best_epoch),
        history: Some(history),
    })
}

/// Area under the ROC curve with tie handling.
#[pyfunction]
fn auc(scores: Vec<f64>, labels: Vec<bool>) -> PyResult<f64> {
    let scored = ScoredEdges::new(scores, labels).map_err(err)?;
    core_metrics::auc(&scored).map_err(err)
}

/// Average precision over the ranked scores.
#[pyfunction]
fn average_precision(scores: Vec<f64>, labels: Vec<bool>) -> PyResult<f64> {
    let scored = ScoredEdges::new(scores, labels).map_err(err)?;
    core_metrics::average_precision(&scored).map_err(err)
}

/// Empirical consistency `mean(a1 * ln(a2))` with its closed-form bounds.
/// Inputs must lie in the sigmoid image of [0, 1].
#[pyfunction]
fn consistency<'py>(py: Python<'py>, a1: Vec<f64>, a2: Vec<f64>) -> PyResult<Bound<'py, PyDict>> {
    let report = core_metrics::consistency_measure(&a1, &a2).map_err(err)?;
    report_dict(py, &report)
}

#[pymodule]
fn cgcl_python(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyDataset>()?;
    m.add_class::<PySplit>()?;
    m.add_class::<PyTrainConfig>()?;
    m.add_class::<PyModel>()?;
    m.add_function(wrap_pyfunction!(load_citation, m)?)?;
    m.add_function(wrap_pyfunction!(load_generic, m)?)?;
    m.add_function(wrap_pyfunction!(generate_sbm, m)?)?;
    m.add_function(wrap_pyfunction!(split_edges, m)?)?;
    m.add_function(wrap_pyfunction!(train, m)?)?;
    m.add_function(wrap_pyfunction!(auc, m)?)?;
    m.add_function(wrap_pyfunction!(average_precision, m)?)?;
    m.add_function(wrap_pyfunction!(consistency, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
