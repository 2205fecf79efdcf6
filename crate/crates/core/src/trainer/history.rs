use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::plot::{line_chart, Series};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HistoryRow {
    pub epoch: usize,
    pub lr: f64,
    pub train_loss: f64,
    pub train_acc: f64,
    pub val_loss: f64,
    pub val_acc: f64,
    pub val_auc: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainingHistory {
    pub seed: u64,
    pub rows: Vec<HistoryRow>,
    pub best_epoch: Option<usize>,
    pub stopped_early: bool,
}

impl TrainingHistory {
    pub fn best_row(&self) -> Option<&HistoryRow> {
        self.best_epoch.and_then(|e| self.rows.iter().find(|r| r.epoch == e))
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent)?;
        }
        let mut w = csv::Writer::from_path(path)?;
        for r in &self.rows {
            w.serialize(r)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv(path: &Path) -> Result<Vec<HistoryRow>> {
        let mut r = csv::Reader::from_path(path)?;
        r.deserialize().map(|row| row.map_err(Into::into)).collect()
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }

    /// `accuracy.png` and `loss.png` curves, train against validation.
    pub fn plot(&self, dir: &Path) -> Result<()> {
        let pts = |f: fn(&HistoryRow) -> f64| self.rows.iter().map(|r| (r.epoch as f64, f(r))).collect();
        line_chart(
            &dir.join("accuracy.png"),
            "Accuracy",
            "Epoch",
            "Accuracy",
            &[
                Series {
                    name: "train",
                    points: pts(|r| r.train_acc),
                },
                Series {
                    name: "validation",
                    points: pts(|r| r.val_acc),
                },
            ],
            false,
        )?;
        line_chart(
            &dir.join("loss.png"),
            "Loss",
            "Epoch",
            "Loss",
            &[
                Series {
                    name: "train",
                    points: pts(|r| r.train_loss),
                },
                Series {
                    name: "validation",
                    points: pts(|r| r.val_loss),
                },
            ],
            false,
        )
    }
}
