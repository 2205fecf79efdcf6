use serde::{Deserialize, Serialize};

use super::model::{sigmoid, softmax};
use crate::error::{Error, Result};
use crate::nn::Tensor;

/// Probability clipping used when the loss is computed from probabilities.
pub const PROB_EPSILON: f64 = 1e-7;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Loss {
    BinaryCrossEntropy,
    CategoricalCrossEntropy,
}

/// Binary cross-entropy for two classes, categorical otherwise.
pub fn build_loss(num_classes: usize) -> Result<Loss> {
    match num_classes {
        0 | 1 => Err(Error::config(format!(
            "num_classes must be at least 2, got {num_classes}"
        ))),
        2 => Ok(Loss::BinaryCrossEntropy),
        _ => Ok(Loss::CategoricalCrossEntropy),
    }
}

impl Loss {
    /// Mean loss over the batch and its gradient w.r.t. the logits.
    pub fn from_logits(self, logits: &Tensor, labels: &[usize]) -> Result<(f64, Tensor)> {
        let n = logits.batch();
        let k = logits.sample_len();
        if labels.len() != n {
            return Err(Error::shape(format!("{n} outputs but {} labels", labels.len())));
        }
        let expected = match self {
            Loss::BinaryCrossEntropy => 1,
            Loss::CategoricalCrossEntropy => k.max(2),
        };
        if k != expected {
            return Err(Error::shape(format!(
                "{self:?} expects {expected} outputs per sample, got {k}"
            )));
        }
        let mut grad = Tensor::zeros(logits.shape());
        let mut total = 0.0;
        let scale = 1.0 / n as f64;
        for (i, (&y, z)) in labels.iter().zip(logits.data().chunks(k)).enumerate() {
            let g = grad.sample_mut(i);
            match self {
                Loss::BinaryCrossEntropy => {
                    let (z, t) = (z[0], y as f64);
                    total += z.max(0.0) - z * t + (-z.abs()).exp().ln_1p();
                    g[0] = (sigmoid(z) - t) * scale;
                }
                Loss::CategoricalCrossEntropy => {
                    if y >= k {
                        return Err(Error::range("class index", y as f64, format!("[0, {k})")));
                    }
                    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                    let lse = max + z.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
                    total += lse - z[y];
                    for (j, p) in softmax(z).into_iter().enumerate() {
                        g[j] = (p - f64::from(u8::from(j == y))) * scale;
                    }
                }
            }
        }
        Ok((total * scale, grad))
    }

    /// Mean loss from probabilities (one column for binary), clipped to
    /// `[PROB_EPSILON, 1 - PROB_EPSILON]`.
    pub fn from_probs(self, probs: &[Vec<f64>], labels: &[usize]) -> Result<f64> {
        if probs.len() != labels.len() || probs.is_empty() {
            return Err(Error::shape(format!(
                "{} predictions for {} labels",
                probs.len(),
                labels.len()
            )));
        }
        let clip = |p: f64| p.clamp(PROB_EPSILON, 1.0 - PROB_EPSILON);
        let mut total = 0.0;
        for (row, &y) in probs.iter().zip(labels) {
            total -= match self {
                Loss::BinaryCrossEntropy => {
                    let p = clip(row[0]);
                    if y == 1 {
                        p.ln()
                    } else {
                        (1.0 - p).ln()
                    }
                }
                Loss::CategoricalCrossEntropy => clip(
                    *row.get(y)
                        .ok_or_else(|| Error::range("class index", y as f64, format!("[0, {})", row.len())))?,
                )
                .ln(),
            };
        }
        Ok(total / probs.len() as f64)
    }
}
