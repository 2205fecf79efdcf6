use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RocCurve {
    /// `(false positive rate, true positive rate)`, from (0,0) to (1,1).
    pub points: Vec<(f64, f64)>,
    /// Score threshold reached at each point (`+inf` for the origin).
    #[serde(with = "infinite_as_null")]
    pub thresholds: Vec<f64>,
    pub auc: f64,
}

// JSON has no infinity; the leading `+inf` threshold is stored as null.
mod infinite_as_null {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(v: &[f64], s: S) -> Result<S::Ok, S::Error> {
        let opt: Vec<Option<f64>> = v.iter().map(|x| x.is_finite().then_some(*x)).collect();
        opt.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<f64>, D::Error> {
        let opt = Vec::<Option<f64>>::deserialize(d)?;
        Ok(opt.into_iter().map(|x| x.unwrap_or(f64::INFINITY)).collect())
    }
}

/// ROC curve over every distinct score threshold, with the trapezoid area.
///
/// The area is accumulated in integer units of one (positive, negative) pair
/// and divided once, so it equals the Mann-Whitney statistic with ties
/// counted as one half.
pub fn roc_and_auc(labels: &[usize], scores: &[f64]) -> Result<RocCurve> {
    if labels.len() != scores.len() {
        return Err(Error::shape(format!(
            "{} labels vs {} scores",
            labels.len(),
            scores.len()
        )));
    }
    if let Some(&bad) = labels.iter().find(|&&l| l > 1) {
        return Err(Error::range("binary label", bad as f64, "{0, 1}"));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::shape("NaN score"));
    }
    let pos = labels.iter().filter(|&&l| l == 1).count() as u64;
    let neg = labels.len() as u64 - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::UndefinedAuc(format!("{pos} positives and {neg} negatives")));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let mut points = vec![(0.0, 0.0)];
    let mut thresholds = vec![f64::INFINITY];
    let (mut tp, mut fp) = (0u64, 0u64);
    let mut twice_area: u128 = 0;
    let mut i = 0;
    while i < order.len() {
        let s = scores[order[i]];
        let (mut dtp, mut dfp) = (0u64, 0u64);
        while i < order.len() && scores[order[i]] == s {
            if labels[order[i]] == 1 {
                dtp += 1;
            } else {
                dfp += 1;
            }
            i += 1;
        }
        twice_area += u128::from(dfp) * u128::from(2 * tp + dtp);
        tp += dtp;
        fp += dfp;
        points.push((fp as f64 / neg as f64, tp as f64 / pos as f64));
        thresholds.push(s);
    }
    let auc = twice_area as f64 / (2 * u128::from(pos) * u128::from(neg)) as f64;
    Ok(RocCurve {
        points,
        thresholds,
        auc,
    })
}

/// Binary AUC from one-column scores, or the unweighted mean of
/// one-vs-rest AUCs over classes that have both positives and negatives.
pub fn auc_score(labels: &[usize], scores: &[Vec<f64>]) -> Result<f64> {
    let width = scores.first().map_or(0, Vec::len);
    if width <= 1 {
        let s: Vec<f64> = scores.iter().map(|r| r[0]).collect();
        return roc_and_auc(labels, &s).map(|r| r.auc);
    }
    let mut aucs = Vec::new();
    for c in 0..width {
        let bin: Vec<usize> = labels.iter().map(|&l| usize::from(l == c)).collect();
        let s: Vec<f64> = scores.iter().map(|r| r[c]).collect();
        match roc_and_auc(&bin, &s) {
            Ok(r) => aucs.push(r.auc),
            Err(Error::UndefinedAuc(_)) => {}
            Err(e) => return Err(e),
        }
    }
    if aucs.is_empty() {
        return Err(Error::UndefinedAuc(
            "no class has both positives and negatives".to_string(),
        ));
    }
    Ok(aucs.iter().sum::<f64>() / aucs.len() as f64)
}
