use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::optim::{Optimizer, OptimizerConfig};
use crate::error::{Error, Result};
use crate::neural::{Input, Model, Reduction};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum StopMetric {
    #[default]
    Accuracy,
    Loss,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub lr_phase1: f64,
    pub lr_phase2: f64,
    /// First epoch of the second learning-rate phase.
    pub phase_boundary: usize,
    /// Consecutive epochs without validation improvement before stopping.
    pub patience: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub optimizer: OptimizerConfig,
    pub stop_on: StopMetric,
    /// Score the starting weights before epoch 0 so they compete for the
    /// best checkpoint. Useful when fine-tuning.
    pub score_initial: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 500,
            lr_phase1: 1e-3,
            lr_phase2: 1e-5,
            phase_boundary: 200,
            patience: 10,
            batch_size: 16,
            seed: 0,
            optimizer: OptimizerConfig::default(),
            stop_on: StopMetric::Accuracy,
            score_initial: false,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.patience == 0 {
            return Err(Error::param("patience must be >= 1"));
        }
        if self.batch_size == 0 {
            return Err(Error::param("batch size must be >= 1"));
        }
        if self.lr_phase1 < 0.0 || self.lr_phase2 < 0.0 {
            return Err(Error::param("learning rates must be non-negative"));
        }
        Ok(())
    }

    /// Two-step schedule; epoch `phase_boundary` already belongs to phase 2.
    pub fn lr_at_epoch(&self, epoch: usize) -> Result<f64> {
        if epoch >= self.epochs {
            return Err(Error::param(format!(
                "epoch {epoch} outside schedule of {} epochs",
                self.epochs
            )));
        }
        Ok(if epoch < self.phase_boundary {
            self.lr_phase1
        } else {
            self.lr_phase2
        })
    }
}

/// Default schedule: 1e-3 for epochs 0..200, 1e-5 for 200..500.
pub fn lr_at_epoch(epoch: usize) -> Result<f64> {
    TrainConfig::default().lr_at_epoch(epoch)
}

/// One line of the per-epoch metrics stream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochMetrics {
    pub epoch: usize,
    pub lr: f64,
    pub train_loss: f64,
    pub val_acc: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Checkpoint with the best validation score.
    pub model: Model<f32>,
    pub history: Vec<EpochMetrics>,
    pub best_epoch: Option<usize>,
    /// Last epoch that ran, if any.
    pub stopped_epoch: Option<usize>,
}

pub type Example<'a> = (&'a Input<f32>, usize);

pub fn accuracy(model: &Model<f32>, set: &[Example]) -> Result<f64> {
    if set.is_empty() {
        return Err(Error::param("accuracy over an empty set"));
    }
    let mut correct = 0usize;
    for (x, y) in set {
        if model.predict(x)? == *y {
            correct += 1;
        }
    }
    Ok(correct as f64 / set.len() as f64)
}

fn mean_loss(model: &Model<f32>, set: &[Example]) -> Result<f64> {
    let mut total = 0.0;
    for (x, y) in set {
        total += model.loss(x, *y)? as f64;
    }
    Ok(total / set.len() as f64)
}

/// Mini-batch training with early stopping.
///
/// The monitored set is `val`, or `train` when `val` is empty. An epoch
/// counts as an improvement only if it strictly beats the best score so far;
/// training stops once `patience` consecutive epochs fail to improve, and
/// the best checkpoint is returned.
pub fn train_model(
    init: Model<f32>,
    train: &[Example],
    val: &[Example],
    cfg: &TrainConfig,
    mut on_epoch: impl FnMut(&EpochMetrics),
) -> Result<TrainOutcome> {
    cfg.validate()?;
    if train.is_empty() {
        return Err(Error::param("empty training set"));
    }
    let monitor = if val.is_empty() { train } else { val };
    let mut model = init;
    let mut best = model.clone();
    let mut best_score = f64::NEG_INFINITY;
    let mut best_epoch = None;
    let mut stopped_epoch = None;
    let mut misses = 0usize;
    let mut history = Vec::new();
    let mut opt = Optimizer::new(cfg.optimizer, model.param_len());
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..train.len()).collect();
    let score_of = |model: &Model<f32>| -> Result<(f64, f64)> {
        let acc = accuracy(model, monitor)?;
        let score = match cfg.stop_on {
            StopMetric::Accuracy => acc,
            StopMetric::Loss => -mean_loss(model, monitor)?,
        };
        Ok((acc, score))
    };
    if cfg.score_initial && cfg.epochs > 0 {
        best_score = score_of(&model)?.1;
    }

    for epoch in 0..cfg.epochs {
        let lr = cfg.lr_at_epoch(epoch)?;
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        for chunk in order.chunks(cfg.batch_size) {
            let batch: Vec<Example> = chunk.iter().map(|&i| train[i]).collect();
            let (loss, grads) = model.batch_gradients(&batch, Reduction::Mean)?;
            let loss = loss as f64;
            if !loss.is_finite() {
                return Err(Error::Diverged { epoch, loss });
            }
            loss_sum += loss * chunk.len() as f64;
            opt.step(model.params_mut(), &grads, lr);
        }
        let train_loss = loss_sum / train.len() as f64;
        let (val_acc, score) = score_of(&model)?;
        let m = EpochMetrics {
            epoch,
            lr,
            train_loss,
            val_acc,
        };
        on_epoch(&m);
        history.push(m);
        stopped_epoch = Some(epoch);
        if score > best_score {
            best_score = score;
            best = model.clone();
            best_epoch = Some(epoch);
            misses = 0;
        } else {
            misses += 1;
            if misses >= cfg.patience {
                break;
            }
        }
    }
    Ok(TrainOutcome {
        model: best,
        history,
        best_epoch,
        stopped_epoch,
    })
}
