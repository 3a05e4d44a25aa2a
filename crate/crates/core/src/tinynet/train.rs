use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::network::bce_from_logit;
use super::{NetError, NetworkModel, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Optimizer {
    Sgd,
    Momentum { beta: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Loss {
    #[default]
    BinaryCrossEntropy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub optimizer: Optimizer,
    pub seed: u64,
    #[serde(default)]
    pub loss: Loss,
    /// L2 penalty on weights (not biases); 0 disables it.
    #[serde(default)]
    pub weight_decay: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 50,
            batch_size: 32,
            learning_rate: 0.05,
            optimizer: Optimizer::Sgd,
            seed: 0,
            loss: Loss::BinaryCrossEntropy,
            weight_decay: 0.0,
        }
    }
}

impl TrainConfig {
    fn check(&self) -> Result<(), NetError> {
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(NetError::Config("epochs and batch_size must be at least 1".into()));
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(NetError::Config(format!(
                "learning rate {} must be finite and nonnegative",
                self.learning_rate
            )));
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return Err(NetError::Config(format!(
                "weight decay {} must be finite and nonnegative",
                self.weight_decay
            )));
        }
        if let Optimizer::Momentum { beta } = self.optimizer {
            if !(0.0..1.0).contains(&beta) {
                return Err(NetError::Config(format!("momentum {beta} outside [0, 1)")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub model: NetworkModel,
    /// Mean per-sample loss of each epoch, measured during that epoch.
    pub loss_history: Vec<f64>,
}

/// Mean binary cross-entropy of the model over `samples`.
pub fn mean_loss(model: &NetworkModel, samples: &[(Tensor, f64)]) -> Result<f64, NetError> {
    let mut total = 0.0;
    for (x, y) in samples {
        total += bce_from_logit(model.logit(x)?, *y);
    }
    Ok(total / samples.len() as f64)
}

/// Mini-batch gradient descent on binary cross-entropy.
///
/// The sample order is reshuffled every epoch from a ChaCha8 stream seeded
/// with `config.seed`; the same inputs always give a bit-identical model.
/// A learning rate of zero is allowed and leaves the weights untouched.
pub fn train(
    model: &NetworkModel,
    samples: &[(Tensor, f64)],
    config: &TrainConfig,
) -> Result<TrainOutcome, NetError> {
    config.check()?;
    if samples.is_empty() {
        return Err(NetError::EmptyTrainingSet);
    }
    for (i, (x, y)) in samples.iter().enumerate() {
        if *y != 0.0 && *y != 1.0 {
            return Err(NetError::Label { index: i, value: *y });
        }
        if x.shape() != model.input_shape() {
            return Err(NetError::Shape {
                layer: 0,
                expected: model.input_shape().to_vec(),
                found: x.shape().to_vec(),
            });
        }
    }

    let mut model = model.clone();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut order: Vec<usize> = (0..samples.len()).collect();
    let mut velocity = model.zero_grads();
    let mut per_sample_loss = vec![0.0; samples.len()];
    let mut history = Vec::with_capacity(config.epochs);

    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        for batch in order.chunks(config.batch_size) {
            let mut grads = model.zero_grads();
            let acts = model.trace_batch(batch.iter().map(|&i| samples[i].0.data().to_vec()).collect());
            let logits = acts.last().expect("trace");
            let dlogits: Vec<f64> = batch
                .iter()
                .zip(logits)
                .map(|(&i, z)| {
                    let y = samples[i].1;
                    per_sample_loss[i] = bce_from_logit(z[0], y);
                    super::layer::sigmoid(z[0]) - y
                })
                .collect();
            model.backprop_batch(&acts, &dlogits, &mut grads);
            if config.weight_decay > 0.0 {
                add_weight_decay(&model, &mut grads, config.weight_decay * batch.len() as f64);
            }
            let scale = config.learning_rate / batch.len() as f64;
            apply_update(&mut model, &grads, &mut velocity, scale, config.optimizer);
        }
        // summed in sample order so the value does not depend on the shuffle
        let loss = per_sample_loss.iter().sum::<f64>() / samples.len() as f64;
        if !loss.is_finite() {
            return Err(NetError::Diverged { epoch });
        }
        history.push(loss);
    }
    model.metadata.seed = config.seed;
    model.metadata.epochs += config.epochs;
    Ok(TrainOutcome {
        model,
        loss_history: history,
    })
}

/// Adds `decay · w` to the gradient of every weight tensor. Biases are the
/// second tensor of a layer and are left alone.
fn add_weight_decay(model: &NetworkModel, grads: &mut [Vec<Vec<f64>>], decay: f64) {
    for (layer, lg) in model.params().iter().zip(grads) {
        if let (Some(w), Some(g)) = (layer.first(), lg.first_mut()) {
            for (gi, wi) in g.iter_mut().zip(w.data()) {
                *gi += decay * wi;
            }
        }
    }
}

fn apply_update(
    model: &mut NetworkModel,
    grads: &[Vec<Vec<f64>>],
    velocity: &mut [Vec<Vec<f64>>],
    scale: f64,
    optimizer: Optimizer,
) {
    for ((layer, lg), lv) in model.params_mut().iter_mut().zip(grads).zip(velocity) {
        for ((t, g), v) in layer.iter_mut().zip(lg).zip(lv) {
            let w = t.data_mut();
            match optimizer {
                Optimizer::Sgd => {
                    for (wi, gi) in w.iter_mut().zip(g) {
                        *wi -= scale * gi;
                    }
                }
                Optimizer::Momentum { beta } => {
                    for ((wi, gi), vi) in w.iter_mut().zip(g).zip(v.iter_mut()) {
                        *vi = beta * *vi - scale * gi;
                        *wi += *vi;
                    }
                }
            }
        }
    }
}
