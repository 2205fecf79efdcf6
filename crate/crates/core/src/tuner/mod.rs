//! Hyperband search over head, freeze and optimizer hyperparameters.

mod hyperband;
mod space;

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

pub use hyperband::{hyperband_schedule, s_max, Bracket, Rung};
pub use space::{RealDomain, SearchSpace, TrialConfig};

use crate::error::{Error, Result};
use crate::modelzoo::{build_model, HeadConfig, ModelSpec};
use crate::pipeline::{BatchingConfig, ImageDataset};
use crate::rng;
use crate::trainer::{train, TrainConfig};

/// Outcome of evaluating one configuration for a given epoch budget.
#[derive(Clone, Debug, PartialEq)]
pub struct TrialOutcome {
    pub objective: f64,
    pub epochs_run: usize,
}

/// Something to maximize. Implementations must be deterministic in
/// `(config, epochs, seed)` for searches to be reproducible.
pub trait Objective: Sync {
    fn evaluate(&self, config: &TrialConfig, epochs: usize, seed: u64) -> Result<TrialOutcome>;
}

impl<F> Objective for F
where
    F: Fn(&TrialConfig, usize, u64) -> Result<TrialOutcome> + Sync,
{
    fn evaluate(&self, config: &TrialConfig, epochs: usize, seed: u64) -> Result<TrialOutcome> {
        self(config, epochs, seed)
    }
}

/// Trains a fresh model per trial and reports the best val accuracy seen.
pub struct TrainingObjective<'a> {
    pub base: ModelSpec,
    pub train: &'a ImageDataset,
    pub val: &'a ImageDataset,
    pub batching: BatchingConfig,
    pub train_config: TrainConfig,
}

impl Objective for TrainingObjective<'_> {
    fn evaluate(&self, config: &TrialConfig, epochs: usize, seed: u64) -> Result<TrialOutcome> {
        let spec = ModelSpec {
            head: HeadConfig {
                dropout_rate: config.dropout_rate,
                dense_units: config.dense_units,
                ..self.base.head.clone()
            },
            freeze_rate: config.freeze_rate,
            seed: rng::derive(seed, "init"),
            ..self.base.clone()
        };
        let mut model = build_model(&spec)?;
        let tc = TrainConfig {
            max_epochs: epochs,
            checkpoint_dir: None,
            seed,
            ..self.train_config.clone()
        };
        let history = train(
            &mut model,
            &config.optimizer_spec(),
            self.train,
            self.val,
            &self.batching,
            &tc,
            None,
        )?;
        let objective = history.rows.iter().map(|r| r.val_acc).fold(f64::NEG_INFINITY, f64::max);
        Ok(TrialOutcome {
            objective,
            epochs_run: history.rows.len(),
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    pub trial: usize,
    /// Index of the sampled configuration within its bracket.
    pub config_id: usize,
    pub bracket: usize,
    pub rung: usize,
    pub config: TrialConfig,
    pub budget: usize,
    pub epochs_run: usize,
    /// `None` when the trial failed.
    pub objective: Option<f64>,
    pub error: Option<String>,
}

impl TrialResult {
    /// The objective, with failed trials at negative infinity.
    pub fn score(&self) -> f64 {
        self.objective.unwrap_or(f64::NEG_INFINITY)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TunerConfig {
    pub max_epochs: usize,
    pub eta: usize,
    pub seed: u64,
    pub workers: usize,
    pub tuning_dir: Option<PathBuf>,
}

impl Default for TunerConfig {
    fn default() -> Self {
        Self {
            max_epochs: 30,
            eta: 3,
            seed: rng::DEFAULT_SEED,
            workers: 1,
            tuning_dir: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SearchOutcome {
    pub best: TrialConfig,
    pub best_objective: f64,
    pub trials: Vec<TrialResult>,
}

/// Runs successive halving in every bracket and returns the configuration
/// with the highest objective over all trials (earliest trial on ties).
pub fn run_search(space: &SearchSpace, objective: &dyn Objective, config: &TunerConfig) -> Result<SearchOutcome> {
    space.validate()?;
    let schedule = hyperband_schedule(config.max_epochs, config.eta)?;
    if let Some(dir) = &config.tuning_dir {
        std::fs::create_dir_all(dir.join("trials"))?;
    }
    let mut trials: Vec<TrialResult> = Vec::new();
    for bracket in &schedule {
        let mut sampler = rng::keyed(config.seed, &[bracket.s as u64]);
        let n0 = bracket.rungs[0].configs;
        let configs: Vec<TrialConfig> = (0..n0).map(|_| space.sample(&mut sampler)).collect();
        let mut alive: Vec<usize> = (0..n0).collect();
        for (i, rung) in bracket.rungs.iter().enumerate() {
            let jobs: Vec<(usize, usize)> = alive
                .iter()
                .enumerate()
                .map(|(k, &cid)| (trials.len() + k, cid))
                .collect();
            let results = run_rung(&jobs, &configs, bracket, i, rung, objective, config);
            if let Some(dir) = &config.tuning_dir {
                for r in &results {
                    let path = dir.join("trials").join(format!("trial_{:04}.json", r.trial));
                    std::fs::write(path, serde_json::to_string_pretty(r)?)?;
                }
            }
            if i + 1 < bracket.rungs.len() {
                alive = promote(&results, bracket.rungs[i + 1].configs);
            }
            trials.extend(results);
        }
    }
    let best = trials
        .iter()
        .filter(|t| t.objective.is_some())
        .fold(None::<&TrialResult>, |acc, t| match acc {
            Some(b) if b.score() >= t.score() => Some(b),
            _ => Some(t),
        })
        .ok_or_else(|| Error::config("every trial failed"))?;
    let outcome = SearchOutcome {
        best: best.config.clone(),
        best_objective: best.score(),
        trials,
    };
    if let Some(dir) = &config.tuning_dir {
        write_summary(dir, &outcome)?;
    }
    Ok(outcome)
}

/// Config ids of the top `keep` results by objective, ties by trial index.
pub fn promote(results: &[TrialResult], keep: usize) -> Vec<usize> {
    let mut ranked: Vec<&TrialResult> = results.iter().collect();
    ranked.sort_by(|a, b| b.score().total_cmp(&a.score()).then(a.trial.cmp(&b.trial)));
    ranked.iter().take(keep).map(|r| r.config_id).collect()
}

fn run_rung(
    jobs: &[(usize, usize)],
    configs: &[TrialConfig],
    bracket: &Bracket,
    rung_idx: usize,
    rung: &Rung,
    objective: &dyn Objective,
    config: &TunerConfig,
) -> Vec<TrialResult> {
    let run = |&(trial, cid): &(usize, usize)| {
        let seed = rng::mix(config.seed, &[bracket.s as u64, cid as u64]);
        let outcome = objective.evaluate(&configs[cid], rung.epochs, seed);
        let (objective, epochs_run, error) = match outcome {
            Ok(o) if o.objective.is_finite() => (Some(o.objective), o.epochs_run.min(rung.epochs), None),
            Ok(o) => (
                None,
                o.epochs_run.min(rung.epochs),
                Some(format!("non-finite objective {}", o.objective)),
            ),
            Err(e) => (None, 0, Some(e.to_string())),
        };
        TrialResult {
            trial,
            config_id: cid,
            bracket: bracket.s,
            rung: rung_idx,
            config: configs[cid].clone(),
            budget: rung.epochs,
            epochs_run,
            objective,
            error,
        }
    };
    let workers = config.workers.max(1).min(jobs.len().max(1));
    if workers == 1 {
        return jobs.iter().map(run).collect();
    }
    let chunk = jobs.len().div_ceil(workers);
    std::thread::scope(|scope| {
        let handles: Vec<_> = jobs
            .chunks(chunk)
            .map(|part| scope.spawn(move || part.iter().map(run).collect::<Vec<_>>()))
            .collect();
        handles
            .into_iter()
            .flat_map(|h| h.join().expect("trial worker panicked"))
            .collect()
    })
}

fn write_summary(dir: &Path, outcome: &SearchOutcome) -> Result<()> {
    let mut ranked: Vec<&TrialResult> = outcome.trials.iter().collect();
    ranked.sort_by(|a, b| b.score().total_cmp(&a.score()).then(a.trial.cmp(&b.trial)));
    let mut w = csv::Writer::from_path(dir.join("leaderboard.csv"))?;
    w.write_record([
        "trial",
        "bracket",
        "rung",
        "budget",
        "epochs_run",
        "objective",
        "dropout_rate",
        "dense_units",
        "learning_rate",
        "weight_decay",
        "freeze_rate",
        "optimizer",
    ])?;
    for t in ranked {
        w.write_record([
            t.trial.to_string(),
            t.bracket.to_string(),
            t.rung.to_string(),
            t.budget.to_string(),
            t.epochs_run.to_string(),
            t.objective
                .map(|o| o.to_string())
                .unwrap_or_else(|| "failed".to_string()),
            t.config.dropout_rate.to_string(),
            t.config.dense_units.to_string(),
            t.config.learning_rate.to_string(),
            t.config.weight_decay.to_string(),
            t.config.freeze_rate.to_string(),
            t.config.optimizer.to_string(),
        ])?;
    }
    w.flush()?;
    std::fs::write(
        dir.join("best.json"),
        serde_json::to_string_pretty(&serde_json::json!({
            "objective": outcome.best_objective,
            "config": outcome.best,
        }))?,
    )?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bowl(c: &TrialConfig, epochs: usize, _: u64) -> Result<TrialOutcome> {
        let d = (c.dropout_rate - 0.3).powi(2) + (c.learning_rate.log10() + 3.4).powi(2);
        Ok(TrialOutcome {
            objective: 1.0 / (1.0 + d) * (epochs as f64 / 30.0).sqrt(),
            epochs_run: epochs,
        })
    }

    #[test]
    fn returns_best_over_all_trials() {
        let out = run_search(&SearchSpace::default(), &bowl, &TunerConfig::default()).unwrap();
        let brute = out
            .trials
            .iter()
            .map(TrialResult::score)
            .fold(f64::NEG_INFINITY, f64::max);
        assert_eq!(out.best_objective, brute);
        assert!(out.trials.iter().all(|t| t.epochs_run <= 30));
        let total: usize = hyperband_schedule(30, 3)
            .unwrap()
            .iter()
            .flat_map(|b| b.rungs.iter().map(|r| r.configs))
            .sum();
        assert_eq!(out.trials.len(), total);
    }

    #[test]
    fn promotion_keeps_top_ceil_n_over_eta() {
        let out = run_search(&SearchSpace::default(), &bowl, &TunerConfig::default()).unwrap();
        for s in 0..=3 {
            for rung in 0..s {
                let here: Vec<TrialResult> = out
                    .trials
                    .iter()
                    .filter(|t| t.bracket == s && t.rung == rung)
                    .cloned()
                    .collect();
                let mut next: Vec<usize> = out
                    .trials
                    .iter()
                    .filter(|t| t.bracket == s && t.rung == rung + 1)
                    .map(|t| t.config_id)
                    .collect();
                let mut expect = promote(&here, here.len().div_ceil(3));
                next.sort_unstable();
                expect.sort_unstable();
                assert_eq!(next, expect);
            }
        }
    }

    #[test]
    fn deterministic_and_parallel_agree() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = TunerConfig {
            max_epochs: 9,
            tuning_dir: Some(dir.path().to_path_buf()),
            ..TunerConfig::default()
        };
        let a = run_search(&SearchSpace::default(), &bowl, &cfg).unwrap();
        let b = run_search(
            &SearchSpace::default(),
            &bowl,
            &TunerConfig {
                workers: 3,
                ..cfg.clone()
            },
        )
        .unwrap();
        assert_eq!(a, b);
        assert!(dir.path().join("leaderboard.csv").exists());
        assert!(dir.path().join("trials/trial_0000.json").exists());
    }

    #[test]
    fn singleton_space() {
        let space = SearchSpace {
            dropout_rate: vec![0.3],
            dense_units: vec![128],
            learning_rate: RealDomain::Grid(vec![5e-5]),
            weight_decay: RealDomain::Grid(vec![1e-5]),
            freeze_rate: vec![0.2],
            optimizer: vec![crate::modelzoo::OptimizerFamily::AdamDecoupledWd],
        };
        let out = run_search(
            &space,
            &bowl,
            &TunerConfig {
                max_epochs: 1,
                ..TunerConfig::default()
            },
        )
        .unwrap();
        assert_eq!(out.trials.len(), 1);
        assert_eq!(out.best.dense_units, 128);
    }

    #[test]
    fn failed_trials_do_not_stop_search() {
        let flaky = |c: &TrialConfig, e: usize, s: u64| {
            if c.dense_units == 512 {
                Err(Error::config("boom"))
            } else {
                bowl(c, e, s)
            }
        };
        let out = run_search(
            &SearchSpace::default(),
            &flaky,
            &TunerConfig {
                max_epochs: 9,
                ..TunerConfig::default()
            },
        )
        .unwrap();
        assert!(out.trials.iter().any(|t| t.objective.is_none()));
        assert_ne!(out.best.dense_units, 512);
    }
}
