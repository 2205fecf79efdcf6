//! The Hyperband schedule for 30 epochs at eta 3, and a search over the
//! default space against a cheap analytic objective.

use tlbench::tuner::{hyperband_schedule, run_search, SearchSpace, TrialConfig, TrialOutcome, TunerConfig};

// Peaks at dropout 0.3 and lr 4e-4; longer budgets score higher.
fn objective(c: &TrialConfig, epochs: usize, _seed: u64) -> tlbench::Result<TrialOutcome> {
    let d = (c.dropout_rate - 0.3).powi(2) + (c.learning_rate.log10() - 4e-4f64.log10()).powi(2);
    Ok(TrialOutcome {
        objective: (1.0 - (-(epochs as f64) / 10.0).exp()) / (1.0 + d),
        epochs_run: epochs,
    })
}

fn main() -> tlbench::Result<()> {
    let schedule = hyperband_schedule(30, 3)?;
    for b in &schedule {
        let rungs: Vec<String> = b.rungs.iter().map(|r| format!("{}x{}", r.configs, r.epochs)).collect();
        println!(
            "bracket s={}: {}  (budget {} epochs)",
            b.s,
            rungs.join(" -> "),
            b.budget()
        );
    }

    let dir = std::env::temp_dir().join("tlbench-hyperband");
    let config = TunerConfig {
        tuning_dir: Some(dir.clone()),
        ..TunerConfig::default()
    };
    let out = run_search(&SearchSpace::default(), &objective, &config)?;
    println!("{} trials, best objective {:.4}", out.trials.len(), out.best_objective);
    println!("best: {:?}", out.best);
    println!("leaderboard and best.json in {}", dir.display());
    Ok(())
}
