//! One-vs-rest ROC curves and AUC.
//!
//! The curve is built by sweeping a decision threshold over the sorted
//! unique scores (ties grouped into a single step) and plotting
//! `(FPR, TPR)` from `(0, 0)` to `(1, 1)`; AUC integrates it with the
//! trapezoidal rule. This equals the pairwise-comparison probability
//! `P(score_pos > score_neg)` with ties counted one half.

use crate::error::{Error, Result};

/// ROC points and area under the curve for one binary problem.
///
/// `labels[i]` marks sample `i` as positive; `scores[i]` is its
/// predicted positive-class probability (or any monotone score).
pub fn roc_auc(scores: &[f64], labels: &[bool]) -> Result<(Vec<(f64, f64)>, f64)> {
    if scores.len() != labels.len() {
        return Err(Error::Shape(format!(
            "roc_auc: {} scores vs {} labels",
            scores.len(),
            labels.len()
        )));
    }
    let positives = labels.iter().filter(|&&l| l).count();
    let negatives = labels.len() - positives;
    if positives == 0 || negatives == 0 {
        return Err(Error::Data(
            "AUC is undefined without both positive and negative labels".into(),
        ));
    }

    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| {
        scores[b]
            .partial_cmp(&scores[a])
            .unwrap_or(std::cmp::Ordering::Equal)
    });

    let mut points = Vec::with_capacity(scores.len() + 1);
    points.push((0.0, 0.0));
    let (mut tp, mut fp) = (0u64, 0u64);
    let mut i = 0;
    while i < order.len() {
        // consume the whole tie group before emitting a point
        let threshold = scores[order[i]];
        while i < order.len() && scores[order[i]] == threshold {
            if labels[order[i]] {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        points.push((fp as f64 / negatives as f64, tp as f64 / positives as f64));
    }

    let mut auc = 0.0;
    for w in points.windows(2) {
        let (x1, y1) = w[0];
        let (x2, y2) = w[1];
        auc += (x2 - x1) * (y1 + y2) / 2.0;
    }
    Ok((points, auc))
}

/// Brute-force pairwise AUC: the probability that a random positive
/// outscores a random negative, ties counted one half. Quadratic; used
/// as the independent oracle in tests.
pub fn pairwise_auc(scores: &[f64], labels: &[bool]) -> Result<f64> {
    let pos: Vec<f64> = scores
        .iter()
        .zip(labels)
        .filter(|(_, &l)| l)
        .map(|(&s, _)| s)
        .collect();
    let neg: Vec<f64> = scores
        .iter()
        .zip(labels)
        .filter(|(_, &l)| !l)
        .map(|(&s, _)| s)
        .collect();
    if pos.is_empty() || neg.is_empty() {
        return Err(Error::Data(
            "AUC is undefined without both positive and negative labels".into(),
        ));
    }
    let mut wins = 0.0f64;
    for &p in &pos {
        for &n in &neg {
            if p > n {
                wins += 1.0;
            } else if p == n {
                wins += 0.5;
            }
        }
    }
    Ok(wins / (pos.len() as f64 * neg.len() as f64))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SplitMix64;

    #[test]
    fn perfect_separation() {
        let (points, auc) = roc_auc(&[0.9, 0.8, 0.3, 0.1], &[true, true, false, false]).unwrap();
        assert_eq!(auc, 1.0);
        assert_eq!(points.first(), Some(&(0.0, 0.0)));
        assert_eq!(points.last(), Some(&(1.0, 1.0)));
    }

    #[test]
    fn all_ties_give_half() {
        let (points, auc) = roc_auc(&[0.5, 0.5, 0.5, 0.5], &[true, false, true, false]).unwrap();
        assert_eq!(auc, 0.5);
        assert_eq!(points, vec![(0.0, 0.0), (1.0, 1.0)]);
    }

    #[test]
    fn interleaved_ranks_match_pairwise_oracle() {
        // positives at ranks 1 and 3 of 4: 3 of 4 pairs won -> 0.75
        let scores = [0.9, 0.6, 0.4, 0.1];
        let labels = [true, false, true, false];
        let (_, auc) = roc_auc(&scores, &labels).unwrap();
        let oracle = pairwise_auc(&scores, &labels).unwrap();
        assert_eq!(oracle, 0.75);
        assert!((auc - oracle).abs() < 1e-15);
    }

    #[test]
    fn single_class_rejected() {
        assert!(roc_auc(&[0.1, 0.9], &[true, true]).is_err());
        assert!(roc_auc(&[0.1, 0.9], &[false, false]).is_err());
    }

    #[test]
    fn trapezoid_equals_pairwise_on_random_sets() {
        let mut rng = SplitMix64::new(404);
        for _ in 0..100 {
            let n = 2 + rng.next_below(60) as usize;
            // coarse grid scores force plenty of ties
            let scores: Vec<f64> = (0..n).map(|_| rng.next_below(8) as f64 / 8.0).collect();
            let mut labels: Vec<bool> = (0..n).map(|_| rng.next_f64() < 0.5).collect();
            labels[0] = true;
            labels[n - 1] = false;
            let (_, auc) = roc_auc(&scores, &labels).unwrap();
            let oracle = pairwise_auc(&scores, &labels).unwrap();
            assert!((auc - oracle).abs() < 1e-12, "{auc} vs {oracle}");
        }
    }
}
