use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::metrics::{ConfusionMatrix, MetricReport};
use super::roc::RocCurve;
use crate::error::{Error, Result};
use crate::plot;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub name: String,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: u64,
}

/// Per-class precision/recall/F1/support with accuracy and macro and
/// support-weighted averages. The text form prints every value at full
/// precision so [`ClassificationReport::parse`] recovers it exactly.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassificationReport {
    pub classes: Vec<ReportRow>,
    pub accuracy: f64,
    pub total: u64,
    pub macro_avg: ReportRow,
    pub weighted_avg: ReportRow,
}

impl ClassificationReport {
    pub fn from_metrics(report: &MetricReport, class_names: &[String]) -> Self {
        let classes: Vec<ReportRow> = report
            .per_class
            .iter()
            .map(|c| ReportRow {
                name: class_names.get(c.class).cloned().unwrap_or_else(|| c.class.to_string()),
                precision: c.precision,
                recall: c.recall,
                f1: c.f1,
                support: c.support,
            })
            .collect();
        let total = report.total;
        let avg = |name: &str, weight: &dyn Fn(&ReportRow) -> f64| {
            let denom: f64 = classes.iter().map(weight).sum();
            let mean = |f: fn(&ReportRow) -> f64| {
                if denom == 0.0 {
                    0.0
                } else {
                    classes.iter().map(|r| f(r) * weight(r)).sum::<f64>() / denom
                }
            };
            ReportRow {
                name: name.to_string(),
                precision: mean(|r| r.precision),
                recall: mean(|r| r.recall),
                f1: mean(|r| r.f1),
                support: total,
            }
        };
        let macro_avg = avg("macro avg", &|_| 1.0);
        let weighted_avg = avg("weighted avg", &|r| r.support as f64);
        Self {
            classes,
            accuracy: report.accuracy,
            total,
            macro_avg,
            weighted_avg,
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        let bad = |line: &str| Error::config(format!("malformed report line `{line}`"));
        let num = |tok: &str, line: &str| tok.parse::<f64>().map_err(|_| bad(line));
        let int = |tok: &str, line: &str| tok.parse::<u64>().map_err(|_| bad(line));
        let mut classes = Vec::new();
        let (mut accuracy, mut total, mut macro_avg, mut weighted_avg) = (None, None, None, None);
        for line in text.lines().skip(1).filter(|l| !l.trim().is_empty()) {
            let toks: Vec<&str> = line.split_whitespace().collect();
            if toks.first() == Some(&"accuracy") && toks.len() == 3 {
                accuracy = Some(num(toks[1], line)?);
                total = Some(int(toks[2], line)?);
                continue;
            }
            if toks.len() < 5 {
                return Err(bad(line));
            }
            let n = toks.len();
            let row = ReportRow {
                name: toks[..n - 4].join(" "),
                precision: num(toks[n - 4], line)?,
                recall: num(toks[n - 3], line)?,
                f1: num(toks[n - 2], line)?,
                support: int(toks[n - 1], line)?,
            };
            match row.name.as_str() {
                "macro avg" => macro_avg = Some(row),
                "weighted avg" => weighted_avg = Some(row),
                _ => classes.push(row),
            }
        }
        let missing = |what: &str| Error::config(format!("report has no {what} line"));
        Ok(Self {
            classes,
            accuracy: accuracy.ok_or_else(|| missing("accuracy"))?,
            total: total.ok_or_else(|| missing("accuracy"))?,
            macro_avg: macro_avg.ok_or_else(|| missing("macro avg"))?,
            weighted_avg: weighted_avg.ok_or_else(|| missing("weighted avg"))?,
        })
    }
}

impl fmt::Display for ClassificationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let w = self
            .classes
            .iter()
            .map(|r| r.name.len())
            .chain([12])
            .max()
            .unwrap_or(12);
        writeln!(
            f,
            "{:>w$} {:>22} {:>22} {:>22} {:>9}",
            "", "precision", "recall", "f1-score", "support"
        )?;
        writeln!(f)?;
        let row = |f: &mut fmt::Formatter<'_>, r: &ReportRow| {
            writeln!(
                f,
                "{:>w$} {:>22} {:>22} {:>22} {:>9}",
                r.name, r.precision, r.recall, r.f1, r.support
            )
        };
        for r in &self.classes {
            row(f, r)?;
        }
        writeln!(f)?;
        writeln!(
            f,
            "{:>w$} {:>22} {:>22} {:>22} {:>9}",
            "accuracy", "", "", self.accuracy, self.total
        )?;
        row(f, &self.macro_avg)?;
        row(f, &self.weighted_avg)
    }
}

/// Everything written to `metrics.json` for one evaluated model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvaluationRecord {
    pub model: String,
    pub class_names: Vec<String>,
    pub threshold: f64,
    pub metrics: MetricReport,
    pub confusion: ConfusionMatrix,
    pub roc: Option<RocCurve>,
    pub warnings: Vec<String>,
}

impl EvaluationRecord {
    pub fn classification_report(&self) -> ClassificationReport {
        ClassificationReport::from_metrics(&self.metrics, &self.class_names)
    }

    /// Writes `metrics.json`, `report.txt`, `confusion.png` and, when a ROC
    /// curve exists, `roc.png` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("metrics.json"), serde_json::to_string_pretty(self)?)?;
        let mut text = format!(
            "model: {}\n{}\n\n{}",
            self.model,
            self.metrics,
            self.classification_report()
        );
        for w in &self.warnings {
            text.push_str(&format!("warning: {w}\n"));
        }
        std::fs::write(dir.join("report.txt"), text)?;
        plot::confusion_heatmap(
            &dir.join("confusion.png"),
            &format!("{} confusion matrix", self.model),
            &self.class_names,
            &self.confusion.counts,
        )?;
        if let Some(roc) = &self.roc {
            plot::line_chart(
                &dir.join("roc.png"),
                &format!("{} ROC (AUC {:.4})", self.model, roc.auc),
                "False positive rate",
                "True positive rate",
                &[plot::Series {
                    name: "ROC",
                    points: roc.points.clone(),
                }],
                true,
            )?;
        }
        Ok(())
    }

    pub fn read(dir: &Path) -> Result<Self> {
        let path = dir.join("metrics.json");
        let text = std::fs::read_to_string(&path).map_err(|_| Error::MissingArtifact {
            path: path.clone(),
            producer: "evaluate",
        })?;
        Ok(serde_json::from_str(&text)?)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LeaderboardRow {
    pub model: String,
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub auc: Option<f64>,
}

impl LeaderboardRow {
    pub fn from_record(r: &EvaluationRecord) -> Self {
        Self {
            model: r.model.clone(),
            accuracy: r.metrics.accuracy,
            precision: r.metrics.precision,
            recall: r.metrics.recall,
            f1: r.metrics.f1,
            auc: r.metrics.auc,
        }
    }
}

pub const LEADERBOARD_HEADER: [&str; 6] = ["Model", "Accuracy", "Precision", "Recall", "F1", "AUC"];

/// CSV with five decimals per metric and an empty AUC cell when undefined.
pub fn leaderboard_csv(rows: &[LeaderboardRow]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(LEADERBOARD_HEADER)?;
    let f = |v: f64| format!("{v:.5}");
    for r in rows {
        w.write_record([
            r.model.clone(),
            f(r.accuracy),
            f(r.precision),
            f(r.recall),
            f(r.f1),
            r.auc.map(f).unwrap_or_default(),
        ])?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// Reads `metrics.json` from every subdirectory of `root`. Models listed in
/// `order` come first in that order, the rest follow by directory name.
pub fn collect_leaderboard(root: &Path, order: &[String]) -> Result<Vec<LeaderboardRow>> {
    let mut dirs: Vec<PathBuf> = match std::fs::read_dir(root) {
        Ok(rd) => rd
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.join("metrics.json").is_file())
            .collect(),
        Err(_) => Vec::new(),
    };
    if dirs.is_empty() {
        return Err(Error::NoReports(root.to_path_buf()));
    }
    dirs.sort();
    let mut rows: Vec<LeaderboardRow> = dirs
        .iter()
        .map(|d| EvaluationRecord::read(d).map(|r| LeaderboardRow::from_record(&r)))
        .collect::<Result<_>>()?;
    let rank = |m: &str| order.iter().position(|o| o == m).unwrap_or(order.len());
    rows.sort_by_key(|r| rank(&r.model));
    Ok(rows)
}
