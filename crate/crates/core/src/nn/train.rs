use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Gradients, LossKind, Network, Real};
use crate::data::Dataset;
use crate::{Error, Result};

/// Mini-batch SGD settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub loss: LossKind,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 0.01,
            epochs: 15,
            batch_size: 64,
            seed: 0,
            loss: LossKind::CrossEntropy,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::param(
                "learning_rate",
                format!("{} is not a finite non-negative rate", self.learning_rate),
            ));
        }
        if self.epochs == 0 {
            return Err(Error::param("epochs", "must be positive"));
        }
        if self.batch_size == 0 {
            return Err(Error::param("batch_size", "must be positive"));
        }
        Ok(())
    }
}

pub(crate) fn image_as<T: Real>(pixels: &[f32]) -> Vec<T> {
    pixels.iter().map(|&x| T::of(x as f64)).collect()
}

/// Trains `net` in place and returns the mean per-sample loss of every epoch.
///
/// Sample order is reshuffled each epoch from a generator seeded only by
/// `config.seed`, so identical inputs give bit-identical weights.
pub fn train<T: Real>(net: &mut Network<T>, data: &Dataset, config: &TrainConfig) -> Result<Vec<f64>> {
    config.validate()?;
    if data.is_empty() {
        return Err(Error::Empty("training set"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(1);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut grads = Gradients::zeros_like(net);
    let mut history = Vec::with_capacity(config.epochs);

    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for batch in order.chunks(config.batch_size) {
            grads.clear();
            for &i in batch {
                let input = image_as::<T>(data.image(i));
                total += net.accumulate_gradients(&input, data.label(i), config.loss, &mut grads)?;
            }
            net.apply_gradients(&grads, T::of(config.learning_rate / batch.len() as f64));
        }
        let mean = total / data.len() as f64;
        log::debug!("epoch {}/{}: loss {mean:.6}", epoch + 1, config.epochs);
        history.push(mean);
    }
    Ok(history)
}

/// Percentage of samples whose predicted label matches the ground truth.
pub fn accuracy<T: Real>(net: &Network<T>, data: &Dataset) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::Empty("evaluation set"));
    }
    let mut correct = 0usize;
    for i in 0..data.len() {
        let (label, _) = net.predict(&image_as::<T>(data.image(i)))?;
        correct += usize::from(label == data.label(i));
    }
    Ok(100.0 * correct as f64 / data.len() as f64)
}
