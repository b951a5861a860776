//! Encoder/decoder model: a single-layer graph convolution shared across
//! views, a per-edge combine step (inner product or Hadamard product), and a
//! two-layer MLP scorer. Includes the Adam optimizer and JSON checkpoints.

use crate::dense::DenseMatrix;
use crate::error::{Error, Result};
use crate::graph::{CsrAdjacency, NodeId};
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::path::Path;
use std::str::FromStr;

const CHECKPOINT_MAGIC: &str = "CGCL1";

const ADAM_BETA1: f64 = 0.9;
const ADAM_BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

/// How the two endpoint embeddings are combined before the MLP.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DecoderHead {
    /// Inner product: a single scalar feeds the MLP.
    Dot,
    /// Elementwise product: the MLP sees all `hidden_dim` coordinates.
    Hadamard,
}

impl FromStr for DecoderHead {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dot" => Ok(Self::Dot),
            "hadamard" => Ok(Self::Hadamard),
            other => Err(Error::InvalidArgument(format!(
                "unknown decoder head {other:?}, expected \"dot\" or \"hadamard\""
            ))),
        }
    }
}

impl std::fmt::Display for DecoderHead {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Dot => "dot",
            Self::Hadamard => "hadamard",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelDims {
    pub in_dim: usize,
    pub hidden_dim: usize,
    pub head: DecoderHead,
}

impl ModelDims {
    pub fn new(in_dim: usize, hidden_dim: usize, head: DecoderHead) -> Result<Self> {
        if in_dim == 0 {
            return Err(Error::InvalidArgument("in_dim must be positive".into()));
        }
        if hidden_dim < 2 {
            return Err(Error::InvalidArgument(format!(
                "hidden_dim must be at least 2, got {hidden_dim}"
            )));
        }
        Ok(Self {
            in_dim,
            hidden_dim,
            head,
        })
    }

    /// Width of the per-edge vector fed to the MLP.
    pub fn edge_feat_dim(&self) -> usize {
        match self.head {
            DecoderHead::Dot => 1,
            DecoderHead::Hadamard => self.hidden_dim,
        }
    }

    /// MLP hidden width, half the embedding width (rounded down).
    pub fn mlp_hidden(&self) -> usize {
        self.hidden_dim / 2
    }
}

/// All learnable tensors. Also reused as the gradient container, since
/// gradients have identical shapes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub dims: ModelDims,
    /// Graph convolution weight, `in_dim x hidden_dim`.
    pub w1: DenseMatrix,
    /// First MLP layer, `edge_feat_dim x mlp_hidden`.
    pub mlp_w1: DenseMatrix,
    pub mlp_b1: Vec<f64>,
    /// Second MLP layer, `mlp_hidden` weights onto a scalar logit.
    pub mlp_w2: Vec<f64>,
    pub mlp_b2: f64,
}

impl ModelParams {
    pub fn zeros_like(dims: ModelDims) -> Self {
        let k = dims.edge_feat_dim();
        let h = dims.mlp_hidden();
        Self {
            dims,
            w1: DenseMatrix::zeros(dims.in_dim, dims.hidden_dim),
            mlp_w1: DenseMatrix::zeros(k, h),
            mlp_b1: vec![0.0; h],
            mlp_w2: vec![0.0; h],
            mlp_b2: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let k = self.dims.edge_feat_dim();
        let h = self.dims.mlp_hidden();
        let shape_ok = self.w1.rows() == self.dims.in_dim
            && self.w1.cols() == self.dims.hidden_dim
            && self.mlp_w1.rows() == k
            && self.mlp_w1.cols() == h
            && self.mlp_b1.len() == h
            && self.mlp_w2.len() == h;
        if !shape_ok {
            return Err(Error::DimensionMismatch(
                "parameter shapes do not match declared dims".into(),
            ));
        }
        let finite = self.w1.is_finite()
            && self.mlp_w1.is_finite()
            && self.mlp_b1.iter().all(|v| v.is_finite())
            && self.mlp_w2.iter().all(|v| v.is_finite())
            && self.mlp_b2.is_finite();
        if !finite {
            return Err(Error::NonFinite {
                stage: "parameters".into(),
            });
        }
        Ok(())
    }

    /// The learnable tensors as flat slices, in a fixed order.
    pub fn slices(&self) -> [&[f64]; 5] {
        [
            self.w1.as_slice(),
            self.mlp_w1.as_slice(),
            &self.mlp_b1,
            &self.mlp_w2,
            std::slice::from_ref(&self.mlp_b2),
        ]
    }

    /// Mutable view of the same tensors, in the same order as [`slices`].
    ///
    /// [`slices`]: ModelParams::slices
    pub fn slices_mut(&mut self) -> [&mut [f64]; 5] {
        [
            self.w1.as_mut_slice(),
            self.mlp_w1.as_mut_slice(),
            &mut self.mlp_b1,
            &mut self.mlp_w2,
            std::slice::from_mut(&mut self.mlp_b2),
        ]
    }
}

fn glorot_fill(matrix: &mut DenseMatrix, fan_in: usize, fan_out: usize, rng: &mut impl Rng) {
    let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
    for v in matrix.as_mut_slice() {
        *v = rng.random_range(-limit..limit);
    }
}

/// Glorot-uniform weights (limit `sqrt(6 / (fan_in + fan_out))`), zero
/// biases. Sampling order is fixed: `w1`, `mlp_w1`, then `mlp_w2`, each
/// row-major, so a seeded RNG reproduces the same model.
pub fn init_params(dims: ModelDims, rng: &mut impl Rng) -> ModelParams {
    let mut params = ModelParams::zeros_like(dims);
    let h = dims.mlp_hidden();
    glorot_fill(&mut params.w1, dims.in_dim, dims.hidden_dim, rng);
    glorot_fill(&mut params.mlp_w1, dims.edge_feat_dim(), h, rng);
    let limit = (6.0 / (h + 1) as f64).sqrt();
    for v in &mut params.mlp_w2 {
        *v = rng.random_range(-limit..limit);
    }
    params
}

fn elu(x: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        x.exp() - 1.0
    }
}

/// ELU gradient recovered from the activation value: for x <= 0 the output
/// is e^x - 1, so the derivative e^x equals output + 1.
fn elu_grad_from_output(z: f64) -> f64 {
    if z > 0.0 {
        1.0
    } else {
        z + 1.0
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// One shared-weight graph convolution: `elu(A (X W1))`, multiplying
/// `X W1` first so the sparse feature matrix drives the cost.
pub fn encode(
    params: &ModelParams,
    adj_norm: &CsrAdjacency,
    features: &DenseMatrix,
) -> Result<DenseMatrix> {
    if features.cols() != params.dims.in_dim {
        return Err(Error::DimensionMismatch(format!(
            "features have {} columns, model expects {}",
            features.cols(),
            params.dims.in_dim
        )));
    }
    if adj_norm.num_nodes() != features.rows() {
        return Err(Error::DimensionMismatch(format!(
            "adjacency has {} nodes, features have {} rows",
            adj_norm.num_nodes(),
            features.rows()
        )));
    }
    let xw = features.matmul(&params.w1)?;
    let mut z = crate::graph::spmm(adj_norm, &xw)?;
    for v in z.as_mut_slice() {
        *v = elu(*v);
    }
    Ok(z)
}

fn combine(head: DecoderHead, zi: &[f64], zj: &[f64], out: &mut [f64]) {
    match head {
        DecoderHead::Dot => {
            out[0] = zi.iter().zip(zj).map(|(a, b)| a * b).sum();
        }
        DecoderHead::Hadamard => {
            for ((o, a), b) in out.iter_mut().zip(zi).zip(zj) {
                *o = a * b;
            }
        }
    }
}

fn mlp_forward(params: &ModelParams, e: &[f64], u: &mut [f64]) -> f64 {
    let h = params.dims.mlp_hidden();
    u[..h].copy_from_slice(&params.mlp_b1);
    for (q, &eq) in e.iter().enumerate() {
        if eq != 0.0 {
            crate::dense::axpy(&mut u[..h], eq, params.mlp_w1.row(q));
        }
    }
    let mut logit = params.mlp_b2;
    for p in 0..h {
        if u[p] > 0.0 {
            logit += u[p] * params.mlp_w2[p];
        }
    }
    logit
}

/// Raw scores (pre-sigmoid logits) for a list of node pairs.
pub fn edge_logits(
    params: &ModelParams,
    z: &DenseMatrix,
    pairs: &[(NodeId, NodeId)],
) -> Result<Vec<f64>> {
    if z.cols() != params.dims.hidden_dim {
        return Err(Error::DimensionMismatch(format!(
            "embeddings have width {}, model expects {}",
            z.cols(),
            params.dims.hidden_dim
        )));
    }
    let n = z.rows();
    let head = params.dims.head;
    let mut e = vec![0.0; params.dims.edge_feat_dim()];
    let mut u = vec![0.0; params.dims.mlp_hidden()];
    let mut logits = Vec::with_capacity(pairs.len());
    for &(i, j) in pairs {
        if i >= n || j >= n {
            return Err(Error::IndexOutOfRange {
                index: i.max(j),
                num_nodes: n,
            });
        }
        combine(head, z.row(i), z.row(j), &mut e);
        logits.push(mlp_forward(params, &e, &mut u));
    }
    Ok(logits)
}

/// A scoring batch: node pairs with binary targets (1 for observed edges,
/// 0 for sampled non-edges).
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeBatch {
    pub pairs: Vec<(NodeId, NodeId)>,
    pub targets: Vec<f64>,
}

impl EdgeBatch {
    pub fn new(pairs: Vec<(NodeId, NodeId)>, targets: Vec<f64>) -> Result<Self> {
        if pairs.len() != targets.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} pairs but {} targets",
                pairs.len(),
                targets.len()
            )));
        }
        if targets.iter().any(|&t| t != 0.0 && t != 1.0) {
            return Err(Error::InvalidArgument("targets must be 0 or 1".into()));
        }
        Ok(Self { pairs, targets })
    }

    /// Positives first (target 1), then negatives (target 0).
    pub fn from_pos_neg(pos: &[(NodeId, NodeId)], neg: &[(NodeId, NodeId)]) -> Self {
        let mut pairs = Vec::with_capacity(pos.len() + neg.len());
        pairs.extend_from_slice(pos);
        pairs.extend_from_slice(neg);
        let mut targets = vec![1.0; pos.len()];
        targets.resize(pos.len() + neg.len(), 0.0);
        Self { pairs, targets }
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }
}

/// Mean binary cross-entropy between logits and binary targets, in the
/// overflow-safe form `max(x, 0) - x y + ln(1 + e^{-|x|})`.
pub fn bce_loss(logits: &[f64], targets: &[f64]) -> Result<f64> {
    if logits.is_empty() {
        return Err(Error::EmptyBatch);
    }
    if logits.len() != targets.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} logits but {} targets",
            logits.len(),
            targets.len()
        )));
    }
    let mut total = 0.0;
    for (&x, &y) in logits.iter().zip(targets) {
        total += x.max(0.0) - x * y + (-x.abs()).exp().ln_1p();
    }
    let loss = total / logits.len() as f64;
    if !loss.is_finite() {
        return Err(Error::NonFinite {
            stage: "loss".into(),
        });
    }
    Ok(loss)
}

/// Forward plus reverse pass for one batch. Returns the mean BCE loss and
/// gradients for every parameter tensor. The adjacency is assumed symmetric,
/// which lets the embedding gradient flow back through the same matrix.
pub fn backward(
    params: &ModelParams,
    adj_norm: &CsrAdjacency,
    features: &DenseMatrix,
    batch: &EdgeBatch,
) -> Result<(f64, ModelParams)> {
    if batch.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let z = encode(params, adj_norm, features)?;
    let n = z.rows();
    let d = params.dims.hidden_dim;
    let k = params.dims.edge_feat_dim();
    let h = params.dims.mlp_hidden();
    let head = params.dims.head;
    let inv_n = 1.0 / batch.len() as f64;

    let mut grads = ModelParams::zeros_like(params.dims);
    let mut dz = DenseMatrix::zeros(n, d);
    let mut e = vec![0.0; k];
    let mut u = vec![0.0; h];
    let mut du = vec![0.0; h];
    let mut de = vec![0.0; k];
    let mut total = 0.0;

    for (&(i, j), &y) in batch.pairs.iter().zip(&batch.targets) {
        if i >= n || j >= n {
            return Err(Error::IndexOutOfRange {
                index: i.max(j),
                num_nodes: n,
            });
        }
        combine(head, z.row(i), z.row(j), &mut e);
        let logit = mlp_forward(params, &e, &mut u);
        total += logit.max(0.0) - logit * y + (-logit.abs()).exp().ln_1p();

        let dlogit = (sigmoid(logit) - y) * inv_n;
        grads.mlp_b2 += dlogit;
        for p in 0..h {
            if u[p] > 0.0 {
                grads.mlp_w2[p] += dlogit * u[p];
                du[p] = dlogit * params.mlp_w2[p];
            } else {
                du[p] = 0.0;
            }
        }
        for p in 0..h {
            grads.mlp_b1[p] += du[p];
        }
        for (q, &eq) in e.iter().enumerate() {
            de[q] = params
                .mlp_w1
                .row(q)
                .iter()
                .zip(&du)
                .map(|(w, g)| w * g)
                .sum();
            if eq != 0.0 {
                crate::dense::axpy(grads.mlp_w1.row_mut(q), eq, &du);
            }
        }
        match head {
            DecoderHead::Dot => {
                let s = de[0];
                if s != 0.0 {
                    crate::dense::axpy(dz.row_mut(i), s, z.row(j));
                    crate::dense::axpy(dz.row_mut(j), s, z.row(i));
                }
            }
            DecoderHead::Hadamard => {
                for q in 0..k {
                    let (zi, zj) = (z.row(i)[q], z.row(j)[q]);
                    dz.row_mut(i)[q] += de[q] * zj;
                    dz.row_mut(j)[q] += de[q] * zi;
                }
            }
        }
    }
    let loss = total * inv_n;
    if !loss.is_finite() {
        return Err(Error::NonFinite {
            stage: "loss".into(),
        });
    }

    for (dv, &zv) in dz.as_mut_slice().iter_mut().zip(z.as_slice()) {
        *dv *= elu_grad_from_output(zv);
    }
    let back = crate::graph::spmm(adj_norm, &dz)?;
    grads.w1 = features.transposed_matmul(&back)?;
    Ok((loss, grads))
}

/// One bias-corrected Adam update, in place.
pub fn adam_step(
    params: &mut ModelParams,
    grads: &ModelParams,
    state: &mut AdamState,
    lr: f64,
) -> Result<()> {
    if params.dims != grads.dims || params.dims != state.first_moment.dims {
        return Err(Error::DimensionMismatch(
            "optimizer state and gradients must share the model dims".into(),
        ));
    }
    let g = grads.slices();
    if g.iter().any(|s| s.iter().any(|v| !v.is_finite())) {
        return Err(Error::NonFinite {
            stage: "gradients".into(),
        });
    }
    state.step_count += 1;
    let t = state.step_count as i32;
    let p = params.slices_mut();
    let m = state.first_moment.slices_mut();
    let v = state.second_moment.slices_mut();
    for (((p, g), m), v) in p.into_iter().zip(g).zip(m).zip(v) {
        adam_update(p, g, m, v, lr, t);
    }
    Ok(())
}

/// First and second moment estimates for every parameter tensor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    first_moment: ModelParams,
    second_moment: ModelParams,
    step_count: u64,
}

impl AdamState {
    pub fn new(dims: ModelDims) -> Self {
        Self {
            first_moment: ModelParams::zeros_like(dims),
            second_moment: ModelParams::zeros_like(dims),
            step_count: 0,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step_count
    }
}

fn adam_update(p: &mut [f64], g: &[f64], m: &mut [f64], v: &mut [f64], lr: f64, t: i32) {
    let bias1 = 1.0 - ADAM_BETA1.powi(t);
    let bias2 = 1.0 - ADAM_BETA2.powi(t);
    for a in 0..p.len() {
        m[a] = ADAM_BETA1 * m[a] + (1.0 - ADAM_BETA1) * g[a];
        v[a] = ADAM_BETA2 * v[a] + (1.0 - ADAM_BETA2) * g[a] * g[a];
        let m_hat = m[a] / bias1;
        let v_hat = v[a] / bias2;
        p[a] -= lr * m_hat / (v_hat.sqrt() + ADAM_EPS);
    }
}

/// Everything needed to resume or re-score a run: parameters, optimizer
/// moments, and the seed the run was launched with.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointData {
    pub params: ModelParams,
    pub adam: AdamState,
    pub seed: u64,
}

#[derive(Serialize, Deserialize)]
struct CheckpointFile {
    magic: String,
    #[serde(flatten)]
    data: CheckpointData,
}

/// Write a JSON checkpoint with a leading format marker.
pub fn save_checkpoint(data: &CheckpointData, path: &Path) -> Result<()> {
    data.params.validate()?;
    let file = CheckpointFile {
        magic: CHECKPOINT_MAGIC.to_string(),
        data: data.clone(),
    };
    std::fs::write(path, serde_json::to_string(&file)?)?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<CheckpointData> {
    let text = std::fs::read_to_string(path)?;
    let file: CheckpointFile = serde_json::from_str(&text)
        .map_err(|e| Error::Checkpoint(format!("{}: {e}", path.display())))?;
    if file.magic != CHECKPOINT_MAGIC {
        return Err(Error::Checkpoint(format!(
            "{}: unsupported format marker {:?}",
            path.display(),
            file.magic
        )));
    }
    file.data.params.validate()?;
    if file.data.adam.first_moment.dims != file.data.params.dims {
        return Err(Error::Checkpoint(format!(
            "{}: optimizer state does not match parameter dims",
            path.display()
        )));
    }
    Ok(file.data)
}
