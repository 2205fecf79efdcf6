//! Confusion matrices, scalar metrics, ROC/AUC, reports and leaderboards.

mod metrics;
mod report;
mod roc;

pub use metrics::{
    averaging_mode, confusion, consistency_warnings, predict_labels, scalar_metrics, Averaging, ClaimedMetrics,
    ClassMetrics, ConfusionMatrix, MetricReport,
};
pub use report::{
    collect_leaderboard, leaderboard_csv, ClassificationReport, EvaluationRecord, LeaderboardRow, ReportRow,
    LEADERBOARD_HEADER,
};
pub use roc::{auc_score, roc_and_auc, RocCurve};

use crate::error::{Error, Result};
use crate::modelzoo::Model;
use crate::pipeline::ImageDataset;

/// Chunk size used when scoring a dataset.
pub const SCORING_BATCH: usize = 64;

/// Class probabilities for every image of `data`, in order.
pub fn score_dataset(model: &mut Model, data: &ImageDataset) -> Result<Vec<Vec<f64>>> {
    let mut out = Vec::with_capacity(data.len());
    let idx: Vec<usize> = (0..data.len()).collect();
    for chunk in idx.chunks(SCORING_BATCH) {
        let (x, _) = data.batch(chunk)?;
        out.extend(model.predict(&x)?);
    }
    Ok(out)
}

/// Scores `data`, thresholds or arg-maxes the scores and computes every
/// metric. AUC is left empty, with a warning, when it is undefined.
pub fn evaluate(
    model: &mut Model,
    data: &ImageDataset,
    name: &str,
    class_names: &[String],
    threshold: f64,
) -> Result<EvaluationRecord> {
    if data.is_empty() {
        return Err(Error::EmptyDataset("evaluation split is empty".to_string()));
    }
    let k = model.spec.head.num_classes;
    let scores = score_dataset(model, data)?;
    let predicted = predict_labels(&scores, k, threshold)?;
    let cm = confusion(&data.labels, &predicted, k)?;
    let mut metrics = scalar_metrics(&cm, averaging_mode(k))?;
    let mut warnings = Vec::new();
    let roc = if k == 2 {
        let s: Vec<f64> = scores.iter().map(|r| r[0]).collect();
        match roc_and_auc(&data.labels, &s) {
            Ok(r) => Some(r),
            Err(Error::UndefinedAuc(msg)) => {
                warnings.push(format!("AUC undefined: {msg}"));
                None
            }
            Err(e) => return Err(e),
        }
    } else {
        None
    };
    metrics.auc = match &roc {
        Some(r) => Some(r.auc),
        None if k > 2 => match auc_score(&data.labels, &scores) {
            Ok(a) => Some(a),
            Err(Error::UndefinedAuc(msg)) => {
                warnings.push(format!("AUC undefined: {msg}"));
                None
            }
            Err(e) => return Err(e),
        },
        None => None,
    };
    for d in &metrics.degenerate {
        warnings.push(format!("zero denominator: {d} set to 0"));
    }
    Ok(EvaluationRecord {
        model: name.to_string(),
        class_names: class_names.to_vec(),
        threshold,
        metrics,
        confusion: cm,
        roc,
        warnings,
    })
}
