use serde::{Deserialize, Serialize};

/// Stops after `patience` consecutive epochs without a val-loss improvement
/// larger than `min_delta`.
#[derive(Clone, Debug, PartialEq)]
pub struct EarlyStopping {
    pub patience: usize,
    pub min_delta: f64,
    best: f64,
    best_epoch: Option<usize>,
    wait: usize,
}

impl EarlyStopping {
    pub fn new(patience: usize, min_delta: f64) -> Self {
        Self {
            patience,
            min_delta,
            best: f64::INFINITY,
            best_epoch: None,
            wait: 0,
        }
    }

    /// Records the val loss of `epoch` (1-based). Returns true when training
    /// should stop after this epoch.
    pub fn update(&mut self, epoch: usize, val_loss: f64) -> bool {
        if val_loss < self.best - self.min_delta {
            self.best = val_loss;
            self.best_epoch = Some(epoch);
            self.wait = 0;
            false
        } else {
            self.wait += 1;
            self.wait >= self.patience
        }
    }

    pub fn improved_at(&self, epoch: usize) -> bool {
        self.best_epoch == Some(epoch)
    }

    pub fn best_epoch(&self) -> Option<usize> {
        self.best_epoch
    }

    pub fn best(&self) -> f64 {
        self.best
    }
}

/// Multiplies the learning rate by `factor` after `patience` epochs without
/// improvement, never going below `min_lr`. The counter resets after every
/// reduction and every improvement.
#[derive(Clone, Debug, PartialEq)]
pub struct ReduceLrOnPlateau {
    pub factor: f64,
    pub patience: usize,
    pub min_lr: f64,
    pub min_delta: f64,
    best: f64,
    wait: usize,
}

impl ReduceLrOnPlateau {
    pub fn new(factor: f64, patience: usize, min_lr: f64, min_delta: f64) -> Self {
        Self {
            factor,
            patience,
            min_lr,
            min_delta,
            best: f64::INFINITY,
            wait: 0,
        }
    }

    /// Returns the learning rate for the next epoch.
    pub fn update(&mut self, val_loss: f64, lr: f64) -> f64 {
        if val_loss < self.best - self.min_delta {
            self.best = val_loss;
            self.wait = 0;
            return lr;
        }
        self.wait += 1;
        if self.wait >= self.patience {
            self.wait = 0;
            if lr > self.min_lr {
                return (lr * self.factor).max(self.min_lr);
            }
        }
        lr
    }
}

/// What the callbacks would do with a given val-loss sequence.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CallbackTrace {
    /// Number of epochs run.
    pub epochs_run: usize,
    pub stopped_early: bool,
    /// Epoch whose weights end up in the model (1-based).
    pub restored_epoch: Option<usize>,
    /// Learning rate in effect during each epoch.
    pub lr: Vec<f64>,
    /// Epochs at whose end the learning rate was reduced.
    pub reductions: Vec<usize>,
}

/// Replays the callback schedule over `val_losses`, capped at `max_epochs`.
pub fn simulate_callbacks(val_losses: &[f64], config: &super::TrainConfig, initial_lr: f64) -> CallbackTrace {
    let mut stop = EarlyStopping::new(config.early_stop_patience, config.min_delta);
    let mut plateau = ReduceLrOnPlateau::new(
        config.lr_reduce_factor,
        config.lr_reduce_patience,
        config.min_lr,
        config.min_delta,
    );
    let mut lr = initial_lr;
    let mut trace = CallbackTrace {
        epochs_run: 0,
        stopped_early: false,
        restored_epoch: None,
        lr: Vec::new(),
        reductions: Vec::new(),
    };
    for (i, &loss) in val_losses.iter().take(config.max_epochs).enumerate() {
        let epoch = i + 1;
        trace.lr.push(lr);
        trace.epochs_run = epoch;
        let halt = stop.update(epoch, loss);
        let next = plateau.update(loss, lr);
        if next != lr {
            trace.reductions.push(epoch);
        }
        lr = next;
        if halt {
            trace.stopped_early = true;
            break;
        }
    }
    trace.restored_epoch = if config.early_stop_restore_best {
        stop.best_epoch()
    } else {
        Some(trace.epochs_run)
    };
    trace
}
