//! Ranking metrics shared by the trainer and the ranker.

/// Area under the ROC curve via the Mann-Whitney statistic, with tied
/// scores counted as half. `None` when either class is absent.
pub fn auc(scores: &[f64], labels: &[bool]) -> Option<f64> {
    assert_eq!(scores.len(), labels.len());
    let pos = labels.iter().filter(|l| **l).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return None;
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    // Average ranks over tie groups.
    let mut rank_sum_pos = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && scores[order[j]] == scores[order[i]] {
            j += 1;
        }
        let avg_rank = (i + 1 + j) as f64 / 2.0;
        rank_sum_pos += avg_rank * order[i..j].iter().filter(|&&k| labels[k]).count() as f64;
        i = j;
    }
    let u = rank_sum_pos - (pos * (pos + 1)) as f64 / 2.0;
    Some(u / (pos as f64 * neg as f64))
}

/// Position of a positive among negatives: how many negatives score
/// strictly higher. Ties favor the positive.
pub fn rank_against(positive: f64, negatives: &[f64]) -> usize {
    negatives.iter().filter(|&&s| s > positive).count()
}

/// Fraction of negatives scored below the positive, ties counted half.
pub fn pairwise_auc(positive: f64, negatives: &[f64]) -> f64 {
    if negatives.is_empty() {
        return 1.0;
    }
    let wins: f64 = negatives
        .iter()
        .map(|&s| {
            if positive > s {
                1.0
            } else if positive == s {
                0.5
            } else {
                0.0
            }
        })
        .sum();
    wins / negatives.len() as f64
}

/// Fraction of ranks below `k`.
pub fn recall_at_k(ranks: &[usize], k: usize) -> Option<f64> {
    if ranks.is_empty() {
        return None;
    }
    Some(ranks.iter().filter(|&&r| r < k).count() as f64 / ranks.len() as f64)
}
