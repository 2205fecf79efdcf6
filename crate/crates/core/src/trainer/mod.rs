//! Seeded training loop with early stopping, plateau LR reduction and
//! per-epoch checkpoints.

mod callbacks;
mod history;

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

pub use callbacks::{simulate_callbacks, CallbackTrace, EarlyStopping, ReduceLrOnPlateau};
pub use history::{HistoryRow, TrainingHistory};

use crate::error::{Error, Result};
use crate::evaluation::{auc_score, predict_labels, SCORING_BATCH};
use crate::modelzoo::{activate, build_loss, build_optimizer, save_checkpoint, Model, OptimizerSpec, Provenance};
use crate::nn::Mode;
use crate::pipeline::{BatchStream, BatchingConfig, ImageDataset};
use crate::rng;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub max_epochs: usize,
    pub early_stop_patience: usize,
    pub early_stop_restore_best: bool,
    pub lr_reduce_factor: f64,
    pub lr_reduce_patience: usize,
    pub min_lr: f64,
    pub min_delta: f64,
    pub checkpoint_dir: Option<PathBuf>,
    /// Checkpoints kept besides the best one; `None` keeps every epoch.
    pub keep_last: Option<usize>,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            max_epochs: 30,
            early_stop_patience: 3,
            early_stop_restore_best: true,
            lr_reduce_factor: 0.5,
            lr_reduce_patience: 2,
            min_lr: 1e-7,
            min_delta: 0.0,
            checkpoint_dir: None,
            keep_last: Some(5),
            seed: rng::DEFAULT_SEED,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_epochs == 0 {
            return Err(Error::config("max_epochs must be at least 1"));
        }
        if self.early_stop_patience == 0 || self.lr_reduce_patience == 0 {
            return Err(Error::config("patience values must be at least 1"));
        }
        if !(self.lr_reduce_factor > 0.0 && self.lr_reduce_factor < 1.0) {
            return Err(Error::range("lr_reduce_factor", self.lr_reduce_factor, "(0, 1)"));
        }
        if !(self.min_lr >= 0.0) || !(self.min_delta >= 0.0) {
            return Err(Error::config("min_lr and min_delta must be nonnegative"));
        }
        Ok(())
    }
}

/// Independent seeds for every stochastic source, derived from one value.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeedPlan {
    pub seed: u64,
    pub init: u64,
    pub shuffle: u64,
    pub dropout: u64,
    pub augmentation: u64,
    pub split: u64,
}

/// Derives the per-source seeds. There is no process-wide RNG: every
/// component takes its seed from the returned plan.
pub fn set_global_seed(seed: u64) -> SeedPlan {
    SeedPlan {
        seed,
        init: rng::derive(seed, "init"),
        shuffle: rng::derive(seed, "shuffle"),
        dropout: rng::derive(seed, "dropout"),
        augmentation: rng::derive(seed, "augmentation"),
        split: rng::derive(seed, "split"),
    }
}

pub fn checkpoint_name(epoch: usize) -> String {
    format!("ckpt_epoch_{epoch:03}.safetensors")
}

/// Mean loss (including the L2 penalty), accuracy and AUC of `model` on `data`.
pub fn evaluate_loss(model: &mut Model, data: &ImageDataset) -> Result<(f64, f64, Option<f64>)> {
    let loss_fn = build_loss(model.spec.head.num_classes)?;
    let idx: Vec<usize> = (0..data.len()).collect();
    let mut total = 0.0;
    let mut probs = Vec::with_capacity(data.len());
    for chunk in idx.chunks(SCORING_BATCH) {
        let (x, y) = data.batch(chunk)?;
        let logits = model.logits(&x, Mode::Infer)?;
        total += loss_fn.from_logits(&logits, &y)?.0 * chunk.len() as f64;
        probs.extend(activate(&logits));
    }
    let loss = total / data.len() as f64 + model.network.penalty();
    let k = model.spec.head.num_classes;
    let pred = predict_labels(&probs, k, 0.5)?;
    let acc = pred.iter().zip(&data.labels).filter(|(a, b)| a == b).count() as f64 / data.len() as f64;
    let auc = match auc_score(&data.labels, &probs) {
        Ok(a) => Some(a),
        Err(Error::UndefinedAuc(_)) => None,
        Err(e) => return Err(e),
    };
    Ok((loss, acc, auc))
}

/// Per-epoch hook, called after each history row is recorded.
pub type EpochHook<'a> = &'a mut dyn FnMut(&HistoryRow);

/// Trains `model` in place. On return the model holds the weights of the
/// best-val-loss epoch (or of the last epoch when restore is disabled).
pub fn train(
    model: &mut Model,
    optimizer: &OptimizerSpec,
    train_data: &ImageDataset,
    val_data: &ImageDataset,
    batching: &BatchingConfig,
    config: &TrainConfig,
    mut on_epoch: Option<EpochHook<'_>>,
) -> Result<TrainingHistory> {
    config.validate()?;
    if train_data.is_empty() || val_data.is_empty() {
        return Err(Error::EmptyDataset(
            "training and validation sets must be nonempty".to_string(),
        ));
    }
    let seeds = set_global_seed(config.seed);
    let stream = BatchStream::new(
        train_data.len(),
        &BatchingConfig {
            seed: seeds.shuffle,
            ..batching.clone()
        },
        true,
    )?;
    let loss_fn = build_loss(model.spec.head.num_classes)?;
    let mut opt = build_optimizer(optimizer)?;
    let mut stop = EarlyStopping::new(config.early_stop_patience, config.min_delta);
    let mut plateau = ReduceLrOnPlateau::new(
        config.lr_reduce_factor,
        config.lr_reduce_patience,
        config.min_lr,
        config.min_delta,
    );
    let mut history = TrainingHistory {
        seed: config.seed,
        ..Default::default()
    };
    let mut best_state = None;
    let mut kept: Vec<usize> = Vec::new();
    let k = model.spec.head.num_classes;

    for epoch in 1..=config.max_epochs {
        model.reseed_dropout(rng::mix(seeds.dropout, &[epoch as u64]));
        let lr = opt.learning_rate();
        let (mut loss_sum, mut correct) = (0.0, 0usize);
        for batch in stream.epoch(epoch - 1) {
            let (x, y) = train_data.batch(&batch)?;
            let logits = model.logits(&x, Mode::Train)?;
            let (loss, grad) = loss_fn.from_logits(&logits, &y)?;
            let loss = loss + model.network.penalty();
            if !loss.is_finite() {
                return Err(Error::Diverged { epoch, loss });
            }
            let pred = predict_labels(&activate(&logits), k, 0.5)?;
            correct += pred.iter().zip(&y).filter(|(a, b)| a == b).count();
            loss_sum += loss * batch.len() as f64;
            model.network.zero_grad();
            model.network.backward(&grad);
            opt.step(&mut model.network);
        }
        let (val_loss, val_acc, val_auc) = evaluate_loss(model, val_data)?;
        if !val_loss.is_finite() {
            return Err(Error::Diverged { epoch, loss: val_loss });
        }
        let row = HistoryRow {
            epoch,
            lr,
            train_loss: loss_sum / train_data.len() as f64,
            train_acc: correct as f64 / train_data.len() as f64,
            val_loss,
            val_acc,
            val_auc,
        };
        let halt = stop.update(epoch, val_loss);
        if stop.improved_at(epoch) {
            best_state = Some(model.network.state());
        }
        opt.set_learning_rate(plateau.update(val_loss, lr));
        if let Some(dir) = &config.checkpoint_dir {
            let path = dir.join(checkpoint_name(epoch));
            save_checkpoint(model, &path, &Provenance::new(model, Some(optimizer), Some(epoch)))?;
            kept.push(epoch);
            if let Some(keep) = config.keep_last {
                prune_checkpoints(dir, &mut kept, keep, stop.best_epoch())?;
            }
        }
        if let Some(hook) = on_epoch.as_deref_mut() {
            hook(&row);
        }
        history.rows.push(row);
        if halt {
            history.stopped_early = true;
            break;
        }
    }
    history.best_epoch = stop.best_epoch();
    if config.early_stop_restore_best {
        if let Some(state) = best_state {
            model.network.load_state(&state)?;
        }
    } else {
        history.best_epoch = history.rows.last().map(|r| r.epoch);
    }
    if let Some(dir) = &config.checkpoint_dir {
        history.write_csv(&dir.join("history.csv"))?;
        history.write_json(&dir.join("history.json"))?;
        history.plot(dir)?;
    }
    Ok(history)
}

fn prune_checkpoints(dir: &Path, kept: &mut Vec<usize>, keep: usize, best: Option<usize>) -> Result<()> {
    while kept.iter().filter(|&&e| Some(e) != best).count() > keep {
        let pos = kept.iter().position(|&e| Some(e) != best).expect("count > keep >= 0");
        let epoch = kept.remove(pos);
        let path = dir.join(checkpoint_name(epoch));
        for p in [path.clone(), crate::modelzoo::sidecar_path(&path)] {
            if p.exists() {
                std::fs::remove_file(p)?;
            }
        }
    }
    Ok(())
}
