//! Ranking metrics for link prediction (AUC, average precision) and the
//! consistency diagnostics with their closed-form bounds.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::path::Path;

/// Prediction scores aligned with binary relevance labels.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredEdges {
    scores: Vec<f64>,
    labels: Vec<bool>,
}

impl ScoredEdges {
    pub fn new(scores: Vec<f64>, labels: Vec<bool>) -> Result<Self> {
        if scores.len() != labels.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} scores but {} labels",
                scores.len(),
                labels.len()
            )));
        }
        if scores.iter().any(|s| !s.is_finite()) {
            return Err(Error::NonFinite {
                stage: "scores".into(),
            });
        }
        Ok(Self { scores, labels })
    }

    /// Positive scores first, then negatives; label order matters for tie
    /// breaking in [`average_precision`].
    pub fn from_pos_neg(pos: &[f64], neg: &[f64]) -> Result<Self> {
        let mut scores = Vec::with_capacity(pos.len() + neg.len());
        scores.extend_from_slice(pos);
        scores.extend_from_slice(neg);
        let mut labels = vec![true; pos.len()];
        labels.resize(pos.len() + neg.len(), false);
        Self::new(scores, labels)
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    pub fn num_positive(&self) -> usize {
        self.labels.iter().filter(|&&l| l).count()
    }

    pub fn scores(&self) -> &[f64] {
        &self.scores
    }

    pub fn labels(&self) -> &[bool] {
        &self.labels
    }
}

/// Probability that a uniformly random positive outscores a uniformly random
/// negative, ties counted as 1/2. Computed from the rank-sum statistic with
/// average ranks for ties, O(N log N).
pub fn auc(scored: &ScoredEdges) -> Result<f64> {
    let n = scored.len();
    let p = scored.num_positive();
    let q = n - p;
    if p == 0 || q == 0 {
        return Err(Error::MetricUndefined(format!(
            "AUC needs both classes, got {p} positive and {q} negative"
        )));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&i, &j| scored.scores[i].partial_cmp(&scored.scores[j]).unwrap());
    let mut pos_rank_sum = 0.0;
    let mut i = 0;
    while i < n {
        let mut j = i + 1;
        while j < n && scored.scores[idx[j]] == scored.scores[idx[i]] {
            j += 1;
        }
        // ranks i+1 ..= j share the average
        let avg_rank = (i + 1 + j) as f64 / 2.0;
        for &k in &idx[i..j] {
            if scored.labels[k] {
                pos_rank_sum += avg_rank;
            }
        }
        i = j;
    }
    Ok((pos_rank_sum - (p * (p + 1)) as f64 / 2.0) / (p * q) as f64)
}

/// Mean of precision@k over the ranks k that hold a positive, with items
/// sorted by descending score. Ties are broken by stable original order, so
/// the input ordering is part of the contract.
pub fn average_precision(scored: &ScoredEdges) -> Result<f64> {
    let p = scored.num_positive();
    if p == 0 {
        return Err(Error::MetricUndefined(
            "average precision needs at least one positive".into(),
        ));
    }
    let mut idx: Vec<usize> = (0..scored.len()).collect();
    idx.sort_by(|&i, &j| scored.scores[j].partial_cmp(&scored.scores[i]).unwrap());
    let mut hits = 0usize;
    let mut total = 0.0;
    for (rank0, &k) in idx.iter().enumerate() {
        if scored.labels[k] {
            hits += 1;
            total += hits as f64 / (rank0 + 1) as f64;
        }
    }
    Ok(total / p as f64)
}

fn sigmoid(x: f64) -> f64 {
    crate::model::sigmoid(x)
}

/// Smallest admissible consistency input, `sigma(0)`.
pub fn consistency_domain_min() -> f64 {
    0.5
}

/// Largest admissible consistency input, `sigma(1) = 1/(1 + 1/e)`.
pub fn consistency_domain_max() -> f64 {
    sigmoid(1.0)
}

/// Closed-form lower bound of the consistency measure, `-ln 2 / (1 + 1/e)`.
pub fn consistency_lower_bound() -> f64 {
    -std::f64::consts::LN_2 / (1.0 + std::f64::consts::E.recip())
}

/// Closed-form upper bound, `-ln(1 + 1/e) / 2`.
pub fn consistency_upper_bound() -> f64 {
    -(1.0 + std::f64::consts::E.recip()).ln() / 2.0
}

/// Empirical consistency `mean(a1 * ln(a2))` with the bounds it must sit in.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConsistencyReport {
    pub c_value: f64,
    pub lower_bound: f64,
    pub upper_bound: f64,
    pub within_bounds: bool,
}

/// Mean of `a1[i] * ln(a2[i])`. Every entry of both arrays must lie in the
/// sigmoid image of [0, 1], i.e. `[0.5, 1/(1 + 1/e)]`; that domain is what
/// makes the closed-form bounds valid.
pub fn consistency_measure(a1: &[f64], a2: &[f64]) -> Result<ConsistencyReport> {
    if a1.is_empty() {
        return Err(Error::EmptyBatch);
    }
    if a1.len() != a2.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} vs {} consistency inputs",
            a1.len(),
            a2.len()
        )));
    }
    let lo = consistency_domain_min();
    let hi = consistency_domain_max();
    for &v in a1.iter().chain(a2) {
        if !(lo..=hi).contains(&v) {
            return Err(Error::InvalidArgument(format!(
                "consistency input {v} outside [{lo}, {hi}]"
            )));
        }
    }
    let c_value = a1.iter().zip(a2).map(|(&x, &y)| x * y.ln()).sum::<f64>() / a1.len() as f64;
    let lower_bound = consistency_lower_bound();
    let upper_bound = consistency_upper_bound();
    Ok(ConsistencyReport {
        c_value,
        lower_bound,
        upper_bound,
        within_bounds: c_value >= lower_bound - 1e-12 && c_value <= upper_bound + 1e-12,
    })
}

/// The four empirical consistency measures compared in the cross-view
/// analysis: between the two input views, between the two reconstructions,
/// and between each view and its own reconstruction. All four arrays index
/// one shared sample of node pairs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CrossViewDiagnostics {
    pub views: ConsistencyReport,
    pub reconstructions: ConsistencyReport,
    pub view1_vs_recon1: ConsistencyReport,
    pub view2_vs_recon2: ConsistencyReport,
}

pub fn cross_view_diagnostics(
    a1_scores: &[f64],
    a2_scores: &[f64],
    recon1_scores: &[f64],
    recon2_scores: &[f64],
) -> Result<CrossViewDiagnostics> {
    Ok(CrossViewDiagnostics {
        views: consistency_measure(a1_scores, a2_scores)?,
        reconstructions: consistency_measure(recon1_scores, recon2_scores)?,
        view1_vs_recon1: consistency_measure(a1_scores, recon1_scores)?,
        view2_vs_recon2: consistency_measure(a2_scores, recon2_scores)?,
    })
}

/// The metrics report written by the command-line tool.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub auc: f64,
    pub ap: f64,
    pub n_pos: usize,
    pub n_neg: usize,
    pub consistency: Option<CrossViewDiagnostics>,
}

impl MetricsReport {
    pub fn from_scores(pos: &[f64], neg: &[f64]) -> Result<Self> {
        let scored = ScoredEdges::from_pos_neg(pos, neg)?;
        Ok(Self {
            auc: auc(&scored)?,
            ap: average_precision(&scored)?,
            n_pos: pos.len(),
            n_neg: neg.len(),
            consistency: None,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// O(P*N) pairwise oracle with ties counted 1/2.
    fn auc_brute_force(scored: &ScoredEdges) -> f64 {
        let pos: Vec<f64> = scored
            .scores()
            .iter()
            .zip(scored.labels())
            .filter(|(_, &l)| l)
            .map(|(&s, _)| s)
            .collect();
        let neg: Vec<f64> = scored
            .scores()
            .iter()
            .zip(scored.labels())
            .filter(|(_, &l)| !l)
            .map(|(&s, _)| s)
            .collect();
        let mut wins = 0.0;
        for &p in &pos {
            for &n in &neg {
                if p > n {
                    wins += 1.0;
                } else if p == n {
                    wins += 0.5;
                }
            }
        }
        wins / (pos.len() * neg.len()) as f64
    }

    /// AP via the precision/recall step formula instead of the positive-rank
    /// scan: sum of precision@k * (recall step) over every rank.
    fn ap_brute_force(scored: &ScoredEdges) -> f64 {
        let mut idx: Vec<usize> = (0..scored.len()).collect();
        idx.sort_by(|&i, &j| scored.scores()[j].partial_cmp(&scored.scores()[i]).unwrap());
        let p = scored.num_positive() as f64;
        let mut seen = 0.0;
        let mut ap = 0.0;
        for (k0, &i) in idx.iter().enumerate() {
            let step = if scored.labels()[i] { 1.0 / p } else { 0.0 };
            if scored.labels()[i] {
                seen += 1.0;
            }
            ap += (seen / (k0 + 1) as f64) * step;
        }
        ap
    }

    #[test]
    fn auc_is_one_for_perfect_separation() {
        let s = ScoredEdges::from_pos_neg(&[0.9, 0.8], &[0.1, 0.2]).unwrap();
        assert_eq!(auc(&s).unwrap(), 1.0);
    }

    #[test]
    fn auc_handles_ties_at_one_half() {
        let s = ScoredEdges::from_pos_neg(&[0.9, 0.8], &[0.7, 0.8]).unwrap();
        assert_eq!(auc(&s).unwrap(), 0.875);
    }

    #[test]
    fn auc_of_constant_scores_is_one_half() {
        let s = ScoredEdges::new(
            vec![0.4; 10],
            vec![
                true, false, true, true, false, false, true, false, true, false,
            ],
        )
        .unwrap();
        assert_eq!(auc(&s).unwrap(), 0.5);
    }

    #[test]
    fn auc_rejects_single_class_inputs() {
        let s = ScoredEdges::from_pos_neg(&[0.9], &[]).unwrap();
        assert!(matches!(auc(&s).unwrap_err(), Error::MetricUndefined(_)));
        let s = ScoredEdges::from_pos_neg(&[], &[0.1, 0.3]).unwrap();
        assert!(auc(&s).is_err());
    }

    #[test]
    fn auc_matches_brute_force_on_random_inputs() {
        let mut rng = ChaCha8Rng::seed_from_u64(50);
        for _ in 0..200 {
            let n = rng.random_range(2..40);
            let mut scores = Vec::with_capacity(n);
            let mut labels = Vec::with_capacity(n);
            for _ in 0..n {
                // coarse grid so ties actually occur
                scores.push((rng.random_range(0..8) as f64) / 8.0);
                labels.push(rng.random_bool(0.5));
            }
            if !labels.contains(&true) || !labels.contains(&false) {
                continue;
            }
            let s = ScoredEdges::new(scores, labels).unwrap();
            assert_eq!(auc(&s).unwrap(), auc_brute_force(&s));
        }
    }

    #[test]
    fn ap_matches_hand_computed_example() {
        let s = ScoredEdges::new(vec![0.9, 0.8, 0.7], vec![true, false, true]).unwrap();
        let got = average_precision(&s).unwrap();
        assert!((got - (1.0 + 2.0 / 3.0) / 2.0).abs() < 1e-15);
    }

    #[test]
    fn ap_is_one_when_positives_lead() {
        let s = ScoredEdges::from_pos_neg(&[0.9, 0.8, 0.7], &[0.3, 0.2]).unwrap();
        assert_eq!(average_precision(&s).unwrap(), 1.0);
    }

    #[test]
    fn ap_of_single_trailing_positive_is_one_over_n() {
        let s =
            ScoredEdges::new(vec![0.9, 0.8, 0.7, 0.1], vec![false, false, false, true]).unwrap();
        assert_eq!(average_precision(&s).unwrap(), 0.25);
    }

    #[test]
    fn ap_tie_break_uses_original_order() {
        // positive listed before an equally scored negative wins the tie
        let s = ScoredEdges::new(vec![0.5, 0.5], vec![true, false]).unwrap();
        assert_eq!(average_precision(&s).unwrap(), 1.0);
        let s = ScoredEdges::new(vec![0.5, 0.5], vec![false, true]).unwrap();
        assert_eq!(average_precision(&s).unwrap(), 0.5);
    }

    #[test]
    fn ap_requires_a_positive() {
        let s = ScoredEdges::from_pos_neg(&[], &[0.5]).unwrap();
        assert!(matches!(
            average_precision(&s).unwrap_err(),
            Error::MetricUndefined(_)
        ));
    }

    #[test]
    fn ap_matches_step_formula_on_random_inputs() {
        let mut rng = ChaCha8Rng::seed_from_u64(51);
        for _ in 0..200 {
            let n = rng.random_range(1..30);
            let mut scores = Vec::with_capacity(n);
            let mut labels = Vec::with_capacity(n);
            for _ in 0..n {
                scores.push((rng.random_range(0..6) as f64) / 6.0);
                labels.push(rng.random_bool(0.4));
            }
            if !labels.contains(&true) {
                continue;
            }
            let s = ScoredEdges::new(scores, labels).unwrap();
            let got = average_precision(&s).unwrap();
            let want = ap_brute_force(&s);
            assert!((got - want).abs() < 1e-12, "{got} vs {want}");
        }
    }

    #[test]
    fn metrics_are_invariant_under_monotone_transforms() {
        let pos = [0.91, 0.33, 0.75];
        let neg = [0.12, 0.33, 0.6, 0.05];
        let s = ScoredEdges::from_pos_neg(&pos, &neg).unwrap();
        let transform = |x: f64| (3.0 * x).exp() - 0.5;
        let tp: Vec<f64> = pos.iter().map(|&x| transform(x)).collect();
        let tn: Vec<f64> = neg.iter().map(|&x| transform(x)).collect();
        let t = ScoredEdges::from_pos_neg(&tp, &tn).unwrap();
        assert_eq!(auc(&s).unwrap(), auc(&t).unwrap());
        assert_eq!(
            average_precision(&s).unwrap(),
            average_precision(&t).unwrap()
        );
    }

    #[test]
    fn scored_edges_reject_nan_and_length_mismatch() {
        assert!(ScoredEdges::new(vec![f64::NAN], vec![true]).is_err());
        assert!(ScoredEdges::new(vec![0.5], vec![true, false]).is_err());
    }

    #[test]
    fn consistency_bounds_match_high_precision_constants() {
        assert!((consistency_lower_bound() - (-0.506731192601549)).abs() < 1e-14);
        assert!((consistency_upper_bound() - (-0.15663084375911143)).abs() < 1e-14);
        assert!((consistency_domain_max() - 0.7310585786300049).abs() < 1e-16);
    }

    #[test]
    fn consistency_of_all_halves_is_half_log_half() {
        let r = consistency_measure(&[0.5], &[0.5]).unwrap();
        assert!((r.c_value - 0.5 * 0.5f64.ln()).abs() < 1e-15);
        assert!(r.within_bounds);
    }

    #[test]
    fn consistency_extreme_case_attains_the_lower_bound() {
        let hi = consistency_domain_max();
        let r = consistency_measure(&[hi], &[0.5]).unwrap();
        assert!((r.c_value - consistency_lower_bound()).abs() < 1e-15);
        assert!(r.within_bounds);
    }

    #[test]
    fn consistency_extreme_case_attains_the_upper_bound() {
        let hi = consistency_domain_max();
        let r = consistency_measure(&[0.5], &[hi]).unwrap();
        assert!((r.c_value - consistency_upper_bound()).abs() < 1e-15);
    }

    #[test]
    fn consistency_rejects_out_of_domain_entries() {
        assert!(consistency_measure(&[0.4], &[0.5]).is_err());
        assert!(consistency_measure(&[0.5], &[0.8]).is_err());
        assert!(consistency_measure(&[], &[]).is_err());
        assert!(consistency_measure(&[0.5, 0.6], &[0.5]).is_err());
    }

    #[test]
    fn consistency_monte_carlo_sweep_stays_in_bounds() {
        let mut rng = ChaCha8Rng::seed_from_u64(52);
        let n = 100_000;
        let mut a1 = Vec::with_capacity(n);
        let mut a2 = Vec::with_capacity(n);
        for _ in 0..n {
            a1.push(sigmoid(rng.random_range(0.0..=1.0)));
            a2.push(sigmoid(rng.random_range(0.0..=1.0)));
        }
        // every pointwise term, not just the mean, respects the bounds
        let (lo, hi) = (consistency_lower_bound(), consistency_upper_bound());
        for (&x, &y) in a1.iter().zip(&a2) {
            let term = x * y.ln();
            assert!(term >= lo - 1e-12 && term <= hi + 1e-12);
        }
        let r = consistency_measure(&a1, &a2).unwrap();
        assert!(r.within_bounds);
    }

    #[test]
    fn pairwise_consistency_gap_is_bounded() {
        let mut rng = ChaCha8Rng::seed_from_u64(53);
        let bound = 1.0 / (1.0 + std::f64::consts::E.recip());
        let mut values = Vec::new();
        for _ in 0..500 {
            let a1 = [sigmoid(rng.random_range(0.0..=1.0))];
            let a2 = [sigmoid(rng.random_range(0.0..=1.0))];
            values.push(consistency_measure(&a1, &a2).unwrap().c_value);
        }
        for &a in &values {
            for &b in &values {
                assert!((a - b).abs() <= bound + 1e-12);
            }
        }
    }

    #[test]
    fn diagnostics_with_identical_inputs_coincide() {
        let a = [0.5, 0.6, 0.7];
        let d = cross_view_diagnostics(&a, &a, &a, &a).unwrap();
        assert_eq!(d.view1_vs_recon1, d.view2_vs_recon2);
        assert_eq!(d.views, d.reconstructions);
    }

    #[test]
    fn diagnostics_are_order_invariant_over_the_sample() {
        let a1 = [0.5, 0.6, 0.7];
        let a2 = [0.7, 0.5, 0.6];
        let r1 = [0.55, 0.65, 0.52];
        let r2 = [0.6, 0.6, 0.6];
        let d = cross_view_diagnostics(&a1, &a2, &r1, &r2).unwrap();
        // permute the shared sample by the same permutation everywhere
        let perm = [2usize, 0, 1];
        let apply = |v: &[f64]| -> Vec<f64> { perm.iter().map(|&i| v[i]).collect() };
        let dp =
            cross_view_diagnostics(&apply(&a1), &apply(&a2), &apply(&r1), &apply(&r2)).unwrap();
        assert!((d.views.c_value - dp.views.c_value).abs() < 1e-15);
        assert!((d.reconstructions.c_value - dp.reconstructions.c_value).abs() < 1e-15);
        assert!((d.view1_vs_recon1.c_value - dp.view1_vs_recon1.c_value).abs() < 1e-15);
    }

    #[test]
    fn report_round_trips_through_json() {
        let mut report = MetricsReport::from_scores(&[0.9, 0.7], &[0.2, 0.4]).unwrap();
        report.consistency = Some(
            cross_view_diagnostics(&[0.5, 0.6], &[0.6, 0.5], &[0.55, 0.6], &[0.5, 0.7]).unwrap(),
        );
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("metrics.json");
        report.save(&path).unwrap();
        let reloaded = MetricsReport::load(&path).unwrap();
        assert_eq!(report, reloaded);
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.contains("\"auc\""));
        assert!(text.contains("\"n_pos\": 2"));
    }
}
