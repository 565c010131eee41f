//! RMSProp training loop and accuracy evaluation.

use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, Splits};
use crate::derive_seed;
use crate::error::{Error, Result};
use crate::memory::peak_rss_bytes;
use crate::model::{argmax, cross_entropy, Model};

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    /// Decay of the squared-gradient average.
    pub rho: f64,
    pub epsilon: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self { learning_rate: 5e-4, batch_size: 512, epochs: 150, seed: 0, rho: 0.99, epsilon: 1e-8 }
    }
}

impl TrainConfig {
    pub fn iris() -> Self {
        Self { learning_rate: 0.01, batch_size: 16, epochs: 400, ..Self::default() }
    }

    pub fn digits() -> Self {
        Self { epochs: 200, ..Self::default() }
    }

    pub fn mnist() -> Self {
        Self { learning_rate: 0.000038, ..Self::default() }
    }

    pub fn olivetti() -> Self {
        Self { epochs: 400, ..Self::default() }
    }

    pub fn preset(dataset: &str) -> Option<Self> {
        match dataset {
            "iris" => Some(Self::iris()),
            "digits" => Some(Self::digits()),
            "mnist" => Some(Self::mnist()),
            "olivetti" => Some(Self::olivetti()),
            _ => None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.into()));
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return bad("learning rate must be finite and non-negative");
        }
        if self.batch_size == 0 {
            return bad("batch size must be at least 1");
        }
        if self.epochs == 0 {
            return bad("epochs must be at least 1");
        }
        if !(0.0..1.0).contains(&self.rho) || self.epsilon <= 0.0 {
            return bad("rho must be in [0, 1) and epsilon positive");
        }
        Ok(())
    }
}

/// Running average of squared gradients, one entry per parameter.
#[derive(Clone, Debug, PartialEq)]
pub struct RmsProp {
    v: Vec<f64>,
}

impl RmsProp {
    pub fn new(n: usize) -> Self {
        Self { v: vec![0.0; n] }
    }

    pub fn mean_square(&self) -> &[f64] {
        &self.v
    }

    /// `v ← ρ·v + (1−ρ)·g²`, then `p ← p − η·g / (√v + ε)`.
    pub fn step(&mut self, params: &mut [f64], grads: &[f64], cfg: &TrainConfig) -> Result<()> {
        if params.len() != grads.len() || params.len() != self.v.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} params, {} grads, optimizer sized for {}",
                params.len(),
                grads.len(),
                self.v.len()
            )));
        }
        for ((p, &g), v) in params.iter_mut().zip(grads).zip(&mut self.v) {
            *v = cfg.rho * *v + (1.0 - cfg.rho) * g * g;
            *p -= cfg.learning_rate * g / (v.sqrt() + cfg.epsilon);
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochMetrics {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_acc: f64,
    pub secs: f64,
    pub peak_mem_bytes: u64,
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub metrics: Vec<EpochMetrics>,
    pub model: Model,
}

const SHUFFLE_STREAM: u64 = 1;
/// Largest number of samples pushed through the model at once during evaluation.
const EVAL_CHUNK: usize = 1024;

/// Fraction of samples whose largest logit is at their label.
pub fn evaluate(model: &Model, data: &Dataset, indices: &[usize]) -> Result<f64> {
    if indices.is_empty() {
        return Err(Error::Dataset("cannot evaluate on an empty split".into()));
    }
    let mut correct = 0usize;
    for chunk in indices.chunks(EVAL_CHUNK) {
        let (x, y) = data.gather(chunk);
        let logits = model.logits(&x)?;
        correct += logits.rows().zip(&y).filter(|(row, &label)| argmax(row) == label).count();
    }
    Ok(correct as f64 / indices.len() as f64)
}

/// Trains with one seeded shuffle per epoch (last partial batch kept) and
/// records the mean training loss and validation accuracy after each epoch.
/// Results depend only on the model, data, splits and `cfg`.
pub fn train(model: Model, data: &Dataset, splits: &Splits, cfg: &TrainConfig) -> Result<TrainOutcome> {
    train_with(model, data, splits, cfg, |_| {})
}

/// [`train`] with a callback invoked after every epoch.
pub fn train_with(
    mut model: Model,
    data: &Dataset,
    splits: &Splits,
    cfg: &TrainConfig,
    mut on_epoch: impl FnMut(&EpochMetrics),
) -> Result<TrainOutcome> {
    cfg.validate()?;
    if splits.train.is_empty() || splits.validation.is_empty() {
        return Err(Error::Dataset("train and validation splits must be non-empty".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, SHUFFLE_STREAM));
    let mut optimizer = RmsProp::new(model.num_params());
    let mut params = model.params();
    let mut order = splits.train.clone();
    let mut metrics = Vec::with_capacity(cfg.epochs);

    for epoch in 0..cfg.epochs {
        let started = Instant::now();
        order.copy_from_slice(&splits.train);
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            let (x, y) = data.gather(batch);
            let (logits, cache) = model.forward(&x)?;
            let loss = cross_entropy(&logits, &y)?;
            let grads = model.backward(&cache, &loss.logit_cotangent(&y))?;
            optimizer.step(&mut params, &grads, cfg)?;
            model.set_params(&params)?;
            loss_sum += loss.per_sample.iter().sum::<f64>();
        }
        let val_acc = evaluate(&model, data, &splits.validation)?;
        let m = EpochMetrics {
            epoch,
            train_loss: loss_sum / order.len() as f64,
            val_acc,
            secs: started.elapsed().as_secs_f64(),
            peak_mem_bytes: peak_rss_bytes(),
        };
        on_epoch(&m);
        metrics.push(m);
    }
    Ok(TrainOutcome { metrics, model })
}
