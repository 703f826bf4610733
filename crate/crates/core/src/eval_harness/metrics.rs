use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Classification metrics for one evaluation split.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct FoldMetrics {
    pub accuracy: f64,
    pub auc: f64,
    pub recall: f64,
    pub f1: f64,
}

impl FoldMetrics {
    pub const NAMES: [&'static str; 4] = ["accuracy", "auc", "recall", "f1"];

    pub fn values(&self) -> [f64; 4] {
        [self.accuracy, self.auc, self.recall, self.f1]
    }

    fn from_values(v: [f64; 4]) -> Self {
        Self {
            accuracy: v[0],
            auc: v[1],
            recall: v[2],
            f1: v[3],
        }
    }
}

/// Mann–Whitney AUC with midranks for ties.
pub fn auc_midrank(scores: &[f64], labels: &[u8]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} scores for {} labels",
            scores.len(),
            labels.len()
        )));
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::NumericFailure("non-finite score".into()));
    }
    let n_pos = labels.iter().filter(|&&l| l == 1).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::SingleClass);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut ranks = vec![0.0; scores.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        // Ranks are 1-based; a tie block shares the average of its ranks.
        let mid = (i + j) as f64 / 2.0 + 1.0;
        for &o in &order[i..=j] {
            ranks[o] = mid;
        }
        i = j + 1;
    }
    let rank_sum: f64 = labels
        .iter()
        .zip(&ranks)
        .filter(|(&l, _)| l == 1)
        .map(|(_, r)| r)
        .sum();
    let u = rank_sum - (n_pos * (n_pos + 1)) as f64 / 2.0;
    Ok(u / (n_pos * n_neg) as f64)
}

/// Accuracy at threshold 0.5 (score ≥ 0.5 predicts class 1), AUC, and
/// recall / F1 of class 1.
pub fn compute_metrics(scores: &[f64], labels: &[u8]) -> Result<FoldMetrics> {
    if let Some(&l) = labels.iter().find(|&&l| l > 1) {
        return Err(Error::InvalidLabel {
            id: "<metrics>".into(),
            label: i64::from(l),
        });
    }
    let auc = auc_midrank(scores, labels)?;
    let (mut tp, mut fp, mut fnn, mut tn) = (0usize, 0usize, 0usize, 0usize);
    for (&s, &l) in scores.iter().zip(labels) {
        match (s >= 0.5, l == 1) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fnn += 1,
            (false, false) => tn += 1,
        }
    }
    let recall = tp as f64 / (tp + fnn) as f64;
    let f1 = if tp == 0 {
        0.0
    } else {
        2.0 * tp as f64 / (2 * tp + fp + fnn) as f64
    };
    Ok(FoldMetrics {
        accuracy: (tp + tn) as f64 / labels.len() as f64,
        auc,
        recall,
        f1,
    })
}

/// Metrics of one (seed, fold) evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldRecord {
    pub seed: u64,
    pub fold: usize,
    pub n_test: usize,
    pub n_labeled: usize,
    pub metrics: FoldMetrics,
}

/// Per-fold records with their mean and population standard deviation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub records: Vec<FoldRecord>,
    pub mean: FoldMetrics,
    pub std: FoldMetrics,
    /// True when no label was read outside fine-tuning and evaluation of its own fold.
    pub label_audit_ok: bool,
}

impl MetricReport {
    /// Aggregates records sorted by (seed, fold), so the result does not
    /// depend on the order runs finished in.
    pub fn from_records(mut records: Vec<FoldRecord>, label_audit_ok: bool) -> Result<Self> {
        if records.is_empty() {
            return Err(Error::InvalidArgument("no fold records to aggregate".into()));
        }
        records.sort_by_key(|r| (r.seed, r.fold));
        let n = records.len() as f64;
        let mut mean = [0.0; 4];
        for r in &records {
            for (m, v) in mean.iter_mut().zip(r.metrics.values()) {
                *m += v / n;
            }
        }
        let mut var = [0.0; 4];
        for r in &records {
            for ((s, v), m) in var.iter_mut().zip(r.metrics.values()).zip(mean) {
                *s += (v - m) * (v - m) / n;
            }
        }
        Ok(Self {
            records,
            mean: FoldMetrics::from_values(mean),
            std: FoldMetrics::from_values(var.map(f64::sqrt)),
            label_audit_ok,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_ordering() {
        let m = compute_metrics(&[0.1, 0.2, 0.8, 0.9], &[0, 0, 1, 1]).unwrap();
        assert_eq!(m, FoldMetrics { accuracy: 1.0, auc: 1.0, recall: 1.0, f1: 1.0 });
    }

    #[test]
    fn all_ties_is_half() {
        assert_eq!(auc_midrank(&[0.5; 6], &[0, 1, 0, 1, 0, 1]).unwrap(), 0.5);
    }

    #[test]
    fn single_class_rejected() {
        assert!(matches!(compute_metrics(&[0.2, 0.7], &[1, 1]), Err(Error::SingleClass)));
    }

    #[test]
    fn population_std() {
        let rec = |fold, acc| FoldRecord {
            seed: 0,
            fold,
            n_test: 4,
            n_labeled: 2,
            metrics: FoldMetrics { accuracy: acc, auc: 0.5, recall: 0.0, f1: 0.0 },
        };
        let r = MetricReport::from_records(vec![rec(1, 1.0), rec(0, 0.5)], true).unwrap();
        assert_eq!(r.mean.accuracy, 0.75);
        assert_eq!(r.std.accuracy, 0.25);
        assert_eq!(r.records[0].fold, 0);
    }
}
