//! Training loop: per-epoch complementary view resampling, cross-view
//! reconstruction steps with sequential Adam updates, loss logging,
//! validation-based model selection, and full-graph inference.

use crate::augment::{bernoulli_split, sample_negatives};
use crate::data::DatasetSplit;
use crate::dense::FeatureMatrix;
use crate::error::{Error, Result};
use crate::graph::{build_adjacency, normalize_symmetric, CsrAdjacency, EdgeList, NodeId};
use crate::metrics::{auc, average_precision, ScoredEdges};
use crate::model::{
    adam_step, backward, edge_logits, encode, init_params, sigmoid, AdamState, DecoderHead,
    EdgeBatch, ModelDims, ModelParams,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::HashSet;
use std::path::Path;
use std::time::Instant;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub lr: f64,
    pub hidden_dim: usize,
    pub head: DecoderHead,
    /// Train on view 1 only (one step per epoch instead of two).
    pub one_view_ablation: bool,
    /// Propagate over the raw 0/1 adjacency instead of the symmetrically
    /// normalized one.
    pub raw_adjacency: bool,
    pub seed: u64,
    /// Track validation AUC every 10 epochs and return the best parameters
    /// seen; otherwise return the final-epoch parameters.
    pub select_by_val: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 800,
            lr: 1e-3,
            hidden_dim: 256,
            head: DecoderHead::Dot,
            one_view_ablation: false,
            raw_adjacency: false,
            seed: 0,
            select_by_val: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::InvalidArgument("epochs must be at least 1".into()));
        }
        if !(self.lr > 0.0) || !self.lr.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "learning rate must be positive and finite, got {}",
                self.lr
            )));
        }
        if self.hidden_dim < 2 {
            return Err(Error::InvalidArgument(format!(
                "hidden_dim must be at least 2, got {}",
                self.hidden_dim
            )));
        }
        Ok(())
    }
}

/// One row of the loss curve. Missing losses mean the view drew no edges
/// that epoch; missing validation columns mean no evaluation ran.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub loss_view1: Option<f64>,
    pub loss_view2: Option<f64>,
    pub val_auc: Option<f64>,
    pub val_ap: Option<f64>,
    pub wall_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TrainLog {
    pub records: Vec<EpochRecord>,
}

impl TrainLog {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("epoch,loss_view1,loss_view2,val_auc,val_ap,wall_ms\n");
        let cell = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        for r in &self.records {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                r.epoch,
                cell(r.loss_view1),
                cell(r.loss_view2),
                cell(r.val_auc),
                cell(r.val_ap),
                r.wall_ms
            ));
        }
        out
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv())?;
        Ok(())
    }
}

/// Output of [`train`]: the selected parameters plus everything needed to
/// reproduce and inspect the run.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainedModel {
    pub params: ModelParams,
    /// Optimizer state at the end of the run (not at the selected epoch).
    pub adam: AdamState,
    pub config: TrainConfig,
    pub log: TrainLog,
    /// Epoch whose parameters were kept; equals `epochs` when selection is
    /// off or no validation evaluation happened.
    pub best_epoch: usize,
}

fn adjacency_for(edges: &EdgeList, raw: bool) -> CsrAdjacency {
    let adj = build_adjacency(edges);
    if raw {
        adj
    } else {
        normalize_symmetric(&adj)
    }
}

fn eval_auc_ap(
    params: &ModelParams,
    adj: &CsrAdjacency,
    features: &FeatureMatrix,
    pos: &EdgeList,
    neg: &EdgeList,
) -> Result<(f64, f64)> {
    let z = encode(params, adj, features)?;
    let pos_logits = edge_logits(params, &z, pos.as_slice())?;
    let neg_logits = edge_logits(params, &z, neg.as_slice())?;
    let scored = ScoredEdges::from_pos_neg(&pos_logits, &neg_logits)?;
    Ok((auc(&scored)?, average_precision(&scored)?))
}

/// Run the cross-view training loop.
///
/// Each epoch resamples the complementary view pair, then takes one step per
/// view in order: encode from view v's adjacency, score all edges of the
/// other view as positives plus an equal number of freshly sampled
/// non-edges as negatives, and apply one Adam update before the next view's
/// step. In ablation mode only the view-1 step runs. Validation AUC is
/// checked every 10 epochs (and at the last epoch) when selection is on, and
/// the best-scoring parameters are returned.
pub fn train(
    split: &DatasetSplit,
    features: &FeatureMatrix,
    config: &TrainConfig,
) -> Result<TrainedModel> {
    config.validate()?;
    let n = split.num_nodes;
    if features.rows() != n {
        return Err(Error::DimensionMismatch(format!(
            "{} feature rows for {} nodes",
            features.rows(),
            n
        )));
    }
    let dims = ModelDims::new(features.cols(), config.hidden_dim, config.head)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut params = init_params(dims, &mut rng);
    let mut adam = AdamState::new(dims);

    let forbidden: HashSet<(NodeId, NodeId)> = split.train_edges.to_set();
    let eval_adj = adjacency_for(&split.train_edges, config.raw_adjacency);
    let has_val = !split.val_pos.is_empty() && !split.val_neg.is_empty();

    let mut log = TrainLog::default();
    let mut best: Option<(f64, usize, ModelParams)> = None;
    let steps_per_epoch = if config.one_view_ablation { 1 } else { 2 };

    for epoch in 1..=config.epochs {
        let started = Instant::now();
        let pair = bernoulli_split(&split.train_edges, &mut rng);
        let mut losses = [None, None];
        for v in 1..=steps_per_epoch {
            let positives = pair.other(v);
            if positives.is_empty() {
                log::warn!(
                    "epoch {epoch}: view {} drew no edges, skipping its step",
                    3 - v
                );
                continue;
            }
            let negatives = sample_negatives(positives.len(), n, &forbidden, &mut rng)?;
            let batch = EdgeBatch::from_pos_neg(positives.as_slice(), &negatives);
            let raw_adj;
            let adj = if config.raw_adjacency {
                raw_adj = adjacency_for(pair.view(v), true);
                &raw_adj
            } else {
                pair.adj(v)
            };
            let (loss, grads) = backward(&params, adj, features, &batch).map_err(|e| match e {
                Error::NonFinite { stage } => Error::NonFinite {
                    stage: format!("{stage} at epoch {epoch}"),
                },
                other => other,
            })?;
            adam_step(&mut params, &grads, &mut adam, config.lr).map_err(|e| match e {
                Error::NonFinite { stage } => Error::NonFinite {
                    stage: format!("{stage} at epoch {epoch}"),
                },
                other => other,
            })?;
            losses[v - 1] = Some(loss);
        }

        let mut val_auc = None;
        let mut val_ap = None;
        if config.select_by_val && has_val && (epoch % 10 == 0 || epoch == config.epochs) {
            let (a, p) = eval_auc_ap(&params, &eval_adj, features, &split.val_pos, &split.val_neg)?;
            val_auc = Some(a);
            val_ap = Some(p);
            if best.as_ref().is_none_or(|(b, _, _)| a > *b) {
                best = Some((a, epoch, params.clone()));
            }
        }

        log.records.push(EpochRecord {
            epoch,
            loss_view1: losses[0],
            loss_view2: losses[1],
            val_auc,
            val_ap,
            wall_ms: started.elapsed().as_millis() as u64,
        });
    }

    let (best_epoch, selected) = match best {
        Some((_, epoch, p)) => (epoch, p),
        None => (config.epochs, params),
    };
    Ok(TrainedModel {
        params: selected,
        adam,
        config: *config,
        log,
        best_epoch,
    })
}

/// Sigmoid link probabilities for arbitrary node pairs, scored against the
/// graph defined by `train_edges`.
pub fn score_pairs(
    params: &ModelParams,
    features: &FeatureMatrix,
    train_edges: &EdgeList,
    pairs: &[(NodeId, NodeId)],
    raw_adjacency: bool,
) -> Result<Vec<f64>> {
    let adj = adjacency_for(train_edges, raw_adjacency);
    let z = encode(params, &adj, features)?;
    let logits = edge_logits(params, &z, pairs)?;
    Ok(logits.into_iter().map(sigmoid).collect())
}

/// Predicted link probabilities per pair, in (0, 1).
pub fn infer_scores(
    model: &TrainedModel,
    features: &FeatureMatrix,
    train_edges: &EdgeList,
    query_pairs: &EdgeBatch,
) -> Result<Vec<f64>> {
    score_pairs(
        &model.params,
        features,
        train_edges,
        &query_pairs.pairs,
        model.config.raw_adjacency,
    )
}

/// AUC and AP of `params` on the given positive/negative pairs, encoding
/// from the training graph.
pub fn evaluate(
    params: &ModelParams,
    features: &FeatureMatrix,
    train_edges: &EdgeList,
    pos: &EdgeList,
    neg: &EdgeList,
    raw_adjacency: bool,
) -> Result<(f64, f64)> {
    let adj = adjacency_for(train_edges, raw_adjacency);
    eval_auc_ap(params, &adj, features, pos, neg)
}

/// Consistency diagnostics over `pairs`: draws one complementary view pair
/// of the training edges from `seed`, encodes each view, and compares the
/// views' membership indicators against the reconstructed scores. All four
/// signals are pushed through the sigmoid before the consistency measure,
/// which expects inputs in its image of [0, 1].
pub fn view_diagnostics(
    params: &ModelParams,
    features: &FeatureMatrix,
    train_edges: &EdgeList,
    pairs: &[(NodeId, NodeId)],
    seed: u64,
    raw_adjacency: bool,
) -> Result<crate::metrics::CrossViewDiagnostics> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let view_pair = bernoulli_split(train_edges, &mut rng);
    let membership = |view: &EdgeList| -> Vec<f64> {
        let set = view.to_set();
        pairs
            .iter()
            .map(|&(a, b)| {
                let key = if a <= b { (a, b) } else { (b, a) };
                sigmoid(if set.contains(&key) { 1.0 } else { 0.0 })
            })
            .collect()
    };
    let a1 = membership(&view_pair.view1);
    let a2 = membership(&view_pair.view2);
    let recon = |view: &EdgeList| -> Result<Vec<f64>> {
        let adj = adjacency_for(view, raw_adjacency);
        let z = encode(params, &adj, features)?;
        let logits = edge_logits(params, &z, pairs)?;
        Ok(logits.into_iter().map(|l| sigmoid(sigmoid(l))).collect())
    };
    let recon1 = recon(&view_pair.view1)?;
    let recon2 = recon(&view_pair.view2)?;
    crate::metrics::cross_view_diagnostics(&a1, &a2, &recon1, &recon2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{generate_sbm, split_edges, RawDataset};
    use rand::Rng;

    fn sbm_split(seed: u64) -> (RawDataset, DatasetSplit) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data = generate_sbm(2, 20, 0.4, 0.02, 8, &mut rng).unwrap();
        let split = split_edges(&data, 0.1, 0.2, &mut rng).unwrap();
        (data, split)
    }

    fn quick_config(seed: u64, epochs: usize) -> TrainConfig {
        TrainConfig {
            epochs,
            lr: 5e-3,
            hidden_dim: 8,
            seed,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn training_is_deterministic_per_seed() {
        let (data, split) = sbm_split(1);
        let config = quick_config(7, 3);
        let a = train(&split, &data.features, &config).unwrap();
        let b = train(&split, &data.features, &config).unwrap();
        assert_eq!(a.params, b.params);
        assert_eq!(a.best_epoch, b.best_epoch);
        let strip = |log: &TrainLog| -> Vec<_> {
            log.records
                .iter()
                .map(|r| (r.epoch, r.loss_view1, r.loss_view2, r.val_auc, r.val_ap))
                .collect()
        };
        assert_eq!(strip(&a.log), strip(&b.log));

        let c = train(&split, &data.features, &quick_config(8, 3)).unwrap();
        assert_ne!(a.params, c.params);
    }

    #[test]
    fn one_epoch_matches_a_manual_replay() {
        // pins the RNG consumption order: init, split, negatives for view 1's
        // step, negatives for view 2's step
        let (data, split) = sbm_split(2);
        let config = quick_config(11, 1);
        let model = train(&split, &data.features, &config).unwrap();

        let dims = ModelDims::new(data.features.cols(), config.hidden_dim, config.head).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut params = init_params(dims, &mut rng);
        let mut adam = AdamState::new(dims);
        let forbidden = split.train_edges.to_set();
        let pair = bernoulli_split(&split.train_edges, &mut rng);
        let n = split.num_nodes;

        let neg1 = sample_negatives(pair.view2.len(), n, &forbidden, &mut rng).unwrap();
        let batch1 = EdgeBatch::from_pos_neg(pair.view2.as_slice(), &neg1);
        let (l1, g1) = backward(&params, &pair.adj1, &data.features, &batch1).unwrap();
        adam_step(&mut params, &g1, &mut adam, config.lr).unwrap();

        let neg2 = sample_negatives(pair.view1.len(), n, &forbidden, &mut rng).unwrap();
        let batch2 = EdgeBatch::from_pos_neg(pair.view1.as_slice(), &neg2);
        let (l2, g2) = backward(&params, &pair.adj2, &data.features, &batch2).unwrap();
        adam_step(&mut params, &g2, &mut adam, config.lr).unwrap();

        assert_eq!(model.log.records[0].loss_view1, Some(l1));
        assert_eq!(model.log.records[0].loss_view2, Some(l2));
        // selection at the final epoch keeps these exact params
        assert_eq!(model.params, params);
    }

    #[test]
    fn adam_steps_match_executed_view_steps() {
        let (data, split) = sbm_split(3);
        let config = quick_config(5, 4);
        let model = train(&split, &data.features, &config).unwrap();
        let executed: u64 = model
            .log
            .records
            .iter()
            .map(|r| r.loss_view1.is_some() as u64 + r.loss_view2.is_some() as u64)
            .sum();
        assert_eq!(model.adam.step_count(), executed);
        // 57 train edges make an empty view astronomically unlikely
        assert_eq!(executed, 8);
    }

    #[test]
    fn ablation_runs_one_step_per_epoch() {
        let (data, split) = sbm_split(4);
        let mut config = quick_config(5, 4);
        config.one_view_ablation = true;
        let model = train(&split, &data.features, &config).unwrap();
        assert!(model.log.records.iter().all(|r| r.loss_view2.is_none()));
        let executed: u64 = model
            .log
            .records
            .iter()
            .map(|r| r.loss_view1.is_some() as u64)
            .sum();
        assert_eq!(model.adam.step_count(), executed);
        assert_eq!(executed, 4);
    }

    #[test]
    fn single_edge_graph_skips_the_empty_view() {
        let features = FeatureMatrix::zeros(3, 2);
        let data = RawDataset {
            features: features.clone(),
            edges: EdgeList::new(3, vec![(0, 1)]).unwrap(),
            node_labels: None,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let split = split_edges(&data, 0.0, 0.0, &mut rng).unwrap();
        let config = quick_config(1, 6);
        let model = train(&split, &features, &config).unwrap();
        for r in &model.log.records {
            let executed = r.loss_view1.is_some() as usize + r.loss_view2.is_some() as usize;
            assert_eq!(executed, 1, "epoch {}", r.epoch);
        }
    }

    #[test]
    fn loss_trend_decreases_on_sbm() {
        let (data, split) = sbm_split(5);
        let config = quick_config(9, 100);
        let model = train(&split, &data.features, &config).unwrap();
        let mean_loss = |records: &[EpochRecord]| {
            let vals: Vec<f64> = records
                .iter()
                .flat_map(|r| [r.loss_view1, r.loss_view2])
                .flatten()
                .collect();
            vals.iter().sum::<f64>() / vals.len() as f64
        };
        let head = mean_loss(&model.log.records[..10]);
        let tail = mean_loss(&model.log.records[90..]);
        assert!(tail < head, "loss went from {head} to {tail}");
    }

    #[test]
    fn validation_selection_keeps_the_argmax_epoch() {
        let (data, split) = sbm_split(6);
        let config = quick_config(13, 40);
        let model = train(&split, &data.features, &config).unwrap();
        let evals: Vec<(usize, f64)> = model
            .log
            .records
            .iter()
            .filter_map(|r| r.val_auc.map(|a| (r.epoch, a)))
            .collect();
        assert!(!evals.is_empty());
        let mut best = evals[0];
        for &(epoch, score) in &evals[1..] {
            if score > best.1 {
                best = (epoch, score);
            }
        }
        assert_eq!(model.best_epoch, best.0);
    }

    #[test]
    fn selection_off_returns_final_epoch() {
        let (data, split) = sbm_split(6);
        let mut config = quick_config(13, 20);
        config.select_by_val = false;
        let model = train(&split, &data.features, &config).unwrap();
        assert_eq!(model.best_epoch, 20);
        assert!(model.log.records.iter().all(|r| r.val_auc.is_none()));
    }

    #[test]
    fn raw_adjacency_mode_trains() {
        let (data, split) = sbm_split(7);
        let mut config = quick_config(3, 5);
        config.raw_adjacency = true;
        let model = train(&split, &data.features, &config).unwrap();
        assert!(model
            .log
            .records
            .iter()
            .flat_map(|r| [r.loss_view1, r.loss_view2])
            .flatten()
            .all(|l| l.is_finite()));
    }

    #[test]
    fn exploding_learning_rate_aborts_with_stage() {
        let (data, split) = sbm_split(8);
        let mut config = quick_config(2, 30);
        config.lr = 1e308;
        match train(&split, &data.features, &config) {
            Err(Error::NonFinite { stage }) => {
                assert!(stage.contains("epoch"), "stage was {stage:?}")
            }
            other => panic!("expected non-finite abort, got {other:?}"),
        }
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let (data, split) = sbm_split(9);
        for config in [
            TrainConfig {
                epochs: 0,
                ..quick_config(0, 1)
            },
            TrainConfig {
                lr: 0.0,
                ..quick_config(0, 1)
            },
            TrainConfig {
                lr: f64::NAN,
                ..quick_config(0, 1)
            },
            TrainConfig {
                hidden_dim: 1,
                ..quick_config(0, 1)
            },
        ] {
            assert!(train(&split, &data.features, &config).is_err());
        }
    }

    #[test]
    fn inferred_scores_are_probabilities_and_symmetric() {
        let (data, split) = sbm_split(10);
        let model = train(&split, &data.features, &quick_config(4, 10)).unwrap();
        let batch = EdgeBatch::from_pos_neg(&[(0, 5), (3, 30)], &[(1, 2)]);
        let scores = infer_scores(&model, &data.features, &split.train_edges, &batch).unwrap();
        assert!(scores.iter().all(|&s| s > 0.0 && s < 1.0));
        let flipped = EdgeBatch::from_pos_neg(&[(5, 0), (30, 3)], &[(2, 1)]);
        let scores2 = infer_scores(&model, &data.features, &split.train_edges, &flipped).unwrap();
        assert_eq!(scores, scores2);
    }

    #[test]
    fn sbm_scores_separate_blocks() {
        let mut rng = ChaCha8Rng::seed_from_u64(30);
        let data = generate_sbm(2, 25, 0.3, 0.01, 8, &mut rng).unwrap();
        let split = split_edges(&data, 0.05, 0.15, &mut rng).unwrap();
        let config = TrainConfig {
            epochs: 150,
            lr: 0.01,
            hidden_dim: 8,
            seed: 1,
            ..TrainConfig::default()
        };
        let model = train(&split, &data.features, &config).unwrap();

        // held-out within-block pairs vs cross-block non-edges
        let edge_set = data.edges.to_set();
        let mut within = Vec::new();
        let mut cross = Vec::new();
        while within.len() < 100 || cross.len() < 100 {
            let a = rng.random_range(0..50);
            let b = rng.random_range(0..50);
            if a == b {
                continue;
            }
            let pair = (a.min(b), a.max(b));
            if edge_set.contains(&pair) {
                continue;
            }
            if a / 25 == b / 25 && within.len() < 100 {
                within.push(pair);
            } else if a / 25 != b / 25 && cross.len() < 100 {
                cross.push(pair);
            }
        }
        let s_within = score_pairs(
            &model.params,
            &data.features,
            &split.train_edges,
            &within,
            false,
        )
        .unwrap();
        let s_cross = score_pairs(
            &model.params,
            &data.features,
            &split.train_edges,
            &cross,
            false,
        )
        .unwrap();
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        assert!(
            mean(&s_within) > mean(&s_cross),
            "within {} vs cross {}",
            mean(&s_within),
            mean(&s_cross)
        );
    }

    #[test]
    fn csv_export_has_header_and_blank_cells() {
        let log = TrainLog {
            records: vec![
                EpochRecord {
                    epoch: 1,
                    loss_view1: Some(0.5),
                    loss_view2: None,
                    val_auc: None,
                    val_ap: None,
                    wall_ms: 12,
                },
                EpochRecord {
                    epoch: 2,
                    loss_view1: Some(0.25),
                    loss_view2: Some(0.75),
                    val_auc: Some(1.0),
                    val_ap: Some(0.875),
                    wall_ms: 9,
                },
            ],
        };
        let csv = log.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(
            lines[0],
            "epoch,loss_view1,loss_view2,val_auc,val_ap,wall_ms"
        );
        assert_eq!(lines[1], "1,0.5,,,,12");
        assert_eq!(lines[2], "2,0.25,0.75,1,0.875,9");
    }

    #[test]
    fn view_diagnostics_stay_in_bounds_and_replay_deterministically() {
        let (data, split) = sbm_split(5);
        let model = train(&split, &data.features, &quick_config(5, 12)).unwrap();
        let pairs: Vec<(NodeId, NodeId)> =
            split.test_pos.iter().chain(split.test_neg.iter()).collect();
        let diag = view_diagnostics(
            &model.params,
            &data.features,
            &split.train_edges,
            &pairs,
            model.config.seed,
            false,
        )
        .unwrap();
        for report in [
            diag.views,
            diag.reconstructions,
            diag.view1_vs_recon1,
            diag.view2_vs_recon2,
        ] {
            assert!(report.within_bounds, "{report:?}");
        }
        let again = view_diagnostics(
            &model.params,
            &data.features,
            &split.train_edges,
            &pairs,
            model.config.seed,
            false,
        )
        .unwrap();
        assert_eq!(diag, again);
    }
}
