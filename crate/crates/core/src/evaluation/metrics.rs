use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Averaging {
    Binary,
    Macro,
}

/// Binary for two classes, macro otherwise.
pub fn averaging_mode(num_classes: usize) -> Averaging {
    if num_classes <= 2 {
        Averaging::Binary
    } else {
        Averaging::Macro
    }
}

/// Turns model scores into labels. One-column rows are positive-class
/// probabilities (`score >= threshold` is positive); wider rows take the
/// arg-max, lowest index on ties.
pub fn predict_labels(scores: &[Vec<f64>], num_classes: usize, threshold: f64) -> Result<Vec<usize>> {
    scores
        .iter()
        .enumerate()
        .map(|(i, row)| match row.len() {
            1 if num_classes == 2 => {
                let s = row[0];
                if !(0.0..=1.0).contains(&s) {
                    return Err(Error::shape(format!("row {i}: binary score {s} outside [0, 1]")));
                }
                Ok(usize::from(s >= threshold))
            }
            k if k == num_classes && k >= 2 => {
                let sum: f64 = row.iter().sum();
                if (sum - 1.0).abs() > 1e-4 {
                    return Err(Error::shape(format!("row {i}: probabilities sum to {sum}")));
                }
                let mut best = 0;
                for (j, &v) in row.iter().enumerate() {
                    if v > row[best] {
                        best = j;
                    }
                }
                Ok(best)
            }
            k => Err(Error::shape(format!("row {i}: {k} scores for {num_classes} classes"))),
        })
        .collect()
}

/// Rows are true classes, columns predicted classes.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub counts: Vec<Vec<u64>>,
}

pub fn confusion(truth: &[usize], predicted: &[usize], k: usize) -> Result<ConfusionMatrix> {
    if truth.len() != predicted.len() {
        return Err(Error::shape(format!(
            "{} true labels vs {} predictions",
            truth.len(),
            predicted.len()
        )));
    }
    let mut counts = vec![vec![0u64; k]; k];
    for (&t, &p) in truth.iter().zip(predicted) {
        for v in [t, p] {
            if v >= k {
                return Err(Error::range("label", v as f64, format!("[0, {k})")));
            }
        }
        counts[t][p] += 1;
    }
    Ok(ConfusionMatrix { counts })
}

impl ConfusionMatrix {
    /// Binary matrix from the four cells, class 1 positive.
    pub fn from_binary(tp: u64, tn: u64, fp: u64, fn_: u64) -> Self {
        Self {
            counts: vec![vec![tn, fp], vec![fn_, tp]],
        }
    }

    pub fn k(&self) -> usize {
        self.counts.len()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.k()).map(|i| self.counts[i][i]).sum()
    }

    pub fn tp(&self) -> u64 {
        self.counts[1][1]
    }

    pub fn tn(&self) -> u64 {
        self.counts[0][0]
    }

    pub fn fp(&self) -> u64 {
        self.counts[0][1]
    }

    pub fn fn_(&self) -> u64 {
        self.counts[1][0]
    }

    /// One-vs-rest (tp, fp, fn) for class `c`.
    pub fn class_counts(&self, c: usize) -> (u64, u64, u64) {
        let tp = self.counts[c][c];
        let predicted: u64 = self.counts.iter().map(|r| r[c]).sum();
        let actual: u64 = self.counts[c].iter().sum();
        (tp, predicted - tp, actual - tp)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub class: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub auc: Option<f64>,
    pub averaging: Averaging,
    pub total: u64,
    pub per_class: Vec<ClassMetrics>,
    /// Metrics whose denominator was zero and were set to 0.
    pub degenerate: Vec<String>,
}

fn ratio(num: u64, den: u64, what: String, flags: &mut Vec<String>) -> f64 {
    if den == 0 {
        flags.push(what);
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Accuracy, precision, recall and F1. Binary averaging reports class 1;
/// macro averaging takes the unweighted mean over classes. F1 is computed as
/// `2TP / (2TP + FP + FN)`, the harmonic mean of precision and recall.
pub fn scalar_metrics(cm: &ConfusionMatrix, averaging: Averaging) -> Result<MetricReport> {
    let total = cm.total();
    if total == 0 {
        return Err(Error::EmptyDataset("confusion matrix is empty".to_string()));
    }
    let k = cm.k();
    if averaging == Averaging::Binary && k != 2 {
        return Err(Error::shape(format!("binary averaging needs 2 classes, got {k}")));
    }
    let mut degenerate = Vec::new();
    let per_class: Vec<ClassMetrics> = (0..k)
        .map(|c| {
            let (tp, fp, fn_) = cm.class_counts(c);
            ClassMetrics {
                class: c,
                precision: ratio(tp, tp + fp, format!("precision[{c}]"), &mut degenerate),
                recall: ratio(tp, tp + fn_, format!("recall[{c}]"), &mut degenerate),
                f1: ratio(2 * tp, 2 * tp + fp + fn_, format!("f1[{c}]"), &mut degenerate),
                support: tp + fn_,
            }
        })
        .collect();
    let (precision, recall, f1) = match averaging {
        Averaging::Binary => {
            let p = &per_class[1];
            degenerate.retain(|d| d.ends_with("[1]"));
            (p.precision, p.recall, p.f1)
        }
        Averaging::Macro => {
            let mean = |f: fn(&ClassMetrics) -> f64| per_class.iter().map(f).sum::<f64>() / k as f64;
            (mean(|c| c.precision), mean(|c| c.recall), mean(|c| c.f1))
        }
    };
    Ok(MetricReport {
        accuracy: cm.trace() as f64 / total as f64,
        precision,
        recall,
        f1,
        auc: None,
        averaging,
        total,
        per_class,
        degenerate,
    })
}

/// Published metric values to compare against a computed report.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ClaimedMetrics {
    pub accuracy: Option<f64>,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub f1: Option<f64>,
    pub auc: Option<f64>,
}

/// One warning per claimed metric that differs from `report` by more
/// than `tolerance`.
pub fn consistency_warnings(report: &MetricReport, claimed: &ClaimedMetrics, tolerance: f64) -> Vec<String> {
    let pairs = [
        ("accuracy", Some(report.accuracy), claimed.accuracy),
        ("precision", Some(report.precision), claimed.precision),
        ("recall", Some(report.recall), claimed.recall),
        ("f1", Some(report.f1), claimed.f1),
        ("auc", report.auc, claimed.auc),
    ];
    pairs
        .into_iter()
        .filter_map(|(name, got, want)| match (got, want) {
            (Some(g), Some(w)) if (g - w).abs() > tolerance => Some(format!(
                "inconsistent {name}: confusion matrix gives {g:.6}, claimed {w:.6} (|diff| {:.6} > {tolerance})",
                (g - w).abs()
            )),
            _ => None,
        })
        .collect()
}

impl fmt::Display for MetricReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "accuracy={:.6} precision={:.6} recall={:.6} f1={:.6}",
            self.accuracy, self.precision, self.recall, self.f1
        )?;
        if let Some(auc) = self.auc {
            write!(f, " auc={auc:.6}")?;
        }
        write!(f, " averaging={:?} n={}", self.averaging, self.total)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn threshold_and_argmax() {
        let s = vec![vec![0.49], vec![0.50], vec![0.51]];
        assert_eq!(predict_labels(&s, 2, 0.5).unwrap(), vec![0, 1, 1]);
        assert_eq!(predict_labels(&[vec![0.2, 0.5, 0.3]], 3, 0.5).unwrap(), vec![1]);
        assert_eq!(predict_labels(&[vec![0.5, 0.5]], 2, 0.5).unwrap(), vec![0]);
        assert!(matches!(
            predict_labels(&[vec![0.2, 0.5]], 3, 0.5),
            Err(Error::Shape(_))
        ));
        assert!(predict_labels(&[vec![0.2, 0.2, 0.2]], 3, 0.5).is_err());
    }

    #[test]
    fn hand_tallied_confusion() {
        let cm = confusion(&[0, 1, 2, 2, 1, 0], &[0, 2, 2, 1, 1, 0], 3).unwrap();
        assert_eq!(cm.counts, vec![vec![2, 0, 0], vec![0, 1, 1], vec![0, 1, 1]]);
        assert_eq!(cm.total(), 6);
        assert!(matches!(confusion(&[3], &[0], 3), Err(Error::Range { .. })));
        let perfect = confusion(&[0, 1, 1], &[0, 1, 1], 2).unwrap();
        assert_eq!(perfect.counts, vec![vec![1, 0], vec![0, 2]]);
    }

    #[test]
    fn published_confusion_matrix() {
        let cm = ConfusionMatrix::from_binary(428, 497, 15, 12);
        assert_eq!(cm.total(), 952);
        let r = scalar_metrics(&cm, Averaging::Binary).unwrap();
        for (got, want) in [
            (r.accuracy, 0.971639),
            (r.precision, 0.966140),
            (r.recall, 0.972727),
            (r.f1, 0.969422),
        ] {
            assert!((got - want).abs() < 1e-6, "{got} vs {want}");
        }
        let claimed = ClaimedMetrics {
            accuracy: Some(0.98004),
            recall: Some(0.98864),
            ..Default::default()
        };
        assert_eq!(consistency_warnings(&r, &claimed, 1e-4).len(), 2);
    }

    #[test]
    fn degenerate_precision_is_flagged() {
        let cm = ConfusionMatrix::from_binary(0, 10, 0, 5);
        let r = scalar_metrics(&cm, Averaging::Binary).unwrap();
        assert_eq!(r.precision, 0.0);
        assert!(r.degenerate.contains(&"precision[1]".to_string()));
        let perfect = scalar_metrics(&ConfusionMatrix::from_binary(3, 4, 0, 0), Averaging::Binary).unwrap();
        assert_eq!(
            (perfect.accuracy, perfect.precision, perfect.recall, perfect.f1),
            (1.0, 1.0, 1.0, 1.0)
        );
        assert!(perfect.degenerate.is_empty());
    }

    #[test]
    fn averaging_rule() {
        assert_eq!(averaging_mode(2), Averaging::Binary);
        assert_eq!(averaging_mode(3), Averaging::Macro);
        assert_eq!(averaging_mode(10), Averaging::Macro);
    }

    proptest! {
        #[test]
        fn f1_between_precision_and_recall(tp in 0u64..500, tn in 0u64..500, fp in 0u64..500, fn_ in 0u64..500) {
            prop_assume!(tp + tn + fp + fn_ > 0);
            let r = scalar_metrics(&ConfusionMatrix::from_binary(tp, tn, fp, fn_), Averaging::Binary).unwrap();
            if r.precision + r.recall > 0.0 {
                prop_assert!(r.f1 >= r.precision.min(r.recall) - 1e-12 && r.f1 <= r.precision.max(r.recall) + 1e-12);
            }
        }

        #[test]
        fn macro_is_permutation_invariant(pairs in proptest::collection::vec((0usize..4, 0usize..4), 1..200), shift in 1usize..4) {
            let (t, p): (Vec<usize>, Vec<usize>) = pairs.iter().copied().unzip();
            let perm = |v: &[usize]| v.iter().map(|x| (x + shift) % 4).collect::<Vec<_>>();
            let a = scalar_metrics(&confusion(&t, &p, 4).unwrap(), Averaging::Macro).unwrap();
            let b = scalar_metrics(&confusion(&perm(&t), &perm(&p), 4).unwrap(), Averaging::Macro).unwrap();
            prop_assert!((a.precision - b.precision).abs() < 1e-12);
            prop_assert!((a.recall - b.recall).abs() < 1e-12);
            prop_assert!((a.f1 - b.f1).abs() < 1e-12);
            prop_assert_eq!(a.accuracy, b.accuracy);
        }

        #[test]
        fn accuracy_is_trace_over_total(pairs in proptest::collection::vec((0usize..5, 0usize..5), 1..300)) {
            let (t, p): (Vec<usize>, Vec<usize>) = pairs.iter().copied().unzip();
            let cm = confusion(&t, &p, 5).unwrap();
            let hits = t.iter().zip(&p).filter(|(a, b)| a == b).count();
            let r = scalar_metrics(&cm, Averaging::Macro).unwrap();
            prop_assert_eq!(r.accuracy, hits as f64 / t.len() as f64);
            prop_assert_eq!(cm.total() as usize, t.len());
        }
    }
}
