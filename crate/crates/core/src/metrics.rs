//! Ranking and classification metrics: AUC and micro-averaged F1.

use alloc::vec::Vec;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum MetricError {
    /// AUC needs at least one positive and one negative example.
    SingleClass,
    EmptyInput,
    /// scores and labels differ in length.
    LengthMismatch { scores: usize, labels: usize },
}

impl core::fmt::Display for MetricError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            MetricError::SingleClass => write!(f, "need both classes present"),
            MetricError::EmptyInput => write!(f, "empty input"),
            MetricError::LengthMismatch { scores, labels } => {
                write!(f, "{scores} scores vs {labels} labels")
            }
        }
    }
}

impl core::error::Error for MetricError {}

/// Area under the ROC curve: the probability that a uniformly random
/// positive outscores a uniformly random negative, ties counted half.
/// Computed from tie-averaged ranks (normalized Mann–Whitney U).
pub fn auc(scores: &[f64], labels: &[bool]) -> Result<f64, MetricError> {
    if scores.len() != labels.len() {
        return Err(MetricError::LengthMismatch {
            scores: scores.len(),
            labels: labels.len(),
        });
    }
    let n_pos = labels.iter().filter(|&&l| l).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(MetricError::SingleClass);
    }

    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].partial_cmp(&scores[b]).expect("NaN score"));

    // average rank within each tie group (ranks are 1-based)
    let mut rank_sum_pos = 0.0f64;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        let avg_rank = (i + 1 + j + 1) as f64 / 2.0;
        for &idx in &order[i..=j] {
            if labels[idx] {
                rank_sum_pos += avg_rank;
            }
        }
        i = j + 1;
    }
    let u = rank_sum_pos - (n_pos * (n_pos + 1)) as f64 / 2.0;
    Ok(u / (n_pos as f64 * n_neg as f64))
}

/// Micro-averaged F1 over the two classes at `threshold` (prediction =
/// score ≥ threshold). Micro-averaging pools per-class TP/FP/FN, which for
/// binary single-label data reduces to plain accuracy.
pub fn micro_f1(scores: &[f64], labels: &[bool], threshold: f64) -> Result<f64, MetricError> {
    if scores.len() != labels.len() {
        return Err(MetricError::LengthMismatch {
            scores: scores.len(),
            labels: labels.len(),
        });
    }
    if scores.is_empty() {
        return Err(MetricError::EmptyInput);
    }
    let correct = scores
        .iter()
        .zip(labels.iter())
        .filter(|(&s, &l)| (s >= threshold) == l)
        .count();
    Ok(correct as f64 / scores.len() as f64)
}
