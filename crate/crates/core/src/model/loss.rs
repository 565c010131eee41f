//! Softmax cross-entropy over class logits.

use crate::error::{Error, Result};
use crate::numeric::Batch;

/// Mean cross-entropy of a batch together with the softmax probabilities
/// needed to seed the backward pass.
#[derive(Clone, Debug)]
pub struct LossValue {
    pub loss: f64,
    pub per_sample: Vec<f64>,
    pub probs: Batch<f64>,
}

impl LossValue {
    /// Gradient of the mean loss with respect to the logits:
    /// `(softmax − onehot) / batch`.
    pub fn logit_cotangent(&self, labels: &[usize]) -> Batch<f64> {
        let scale = 1.0 / self.probs.len() as f64;
        let mut out = self.probs.clone();
        for (row, &label) in out.rows_mut().zip(labels) {
            for v in row.iter_mut() {
                *v *= scale;
            }
            row[label] -= scale;
        }
        out
    }
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&z| (z - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

pub fn cross_entropy(logits: &Batch<f64>, labels: &[usize]) -> Result<LossValue> {
    if logits.is_empty() {
        return Err(Error::EmptyBatch);
    }
    if labels.len() != logits.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} labels for {} samples",
            labels.len(),
            logits.len()
        )));
    }
    let classes = logits.width();
    let mut per_sample = Vec::with_capacity(labels.len());
    let mut probs = Vec::with_capacity(logits.as_slice().len());
    for (row, &label) in logits.rows().zip(labels) {
        if label >= classes {
            return Err(Error::LabelOutOfRange { label, classes });
        }
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let log_total = row.iter().map(|&z| (z - max).exp()).sum::<f64>().ln() + max;
        per_sample.push(log_total - row[label]);
        probs.extend(row.iter().map(|&z| (z - log_total).exp()));
    }
    let loss = per_sample.iter().sum::<f64>() / per_sample.len() as f64;
    Ok(LossValue { loss, per_sample, probs: Batch::from_flat(classes, probs)? })
}
