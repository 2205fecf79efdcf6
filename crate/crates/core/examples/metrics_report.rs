//! Metrics from a published confusion matrix, checked against the values
//! reported alongside it, plus a leaderboard CSV.

use tlbench::evaluation::{
    consistency_warnings, leaderboard_csv, roc_and_auc, scalar_metrics, Averaging, ClaimedMetrics,
    ClassificationReport, ConfusionMatrix, LeaderboardRow,
};

fn main() -> tlbench::Result<()> {
    // DenseNet121 on 952 test images
    let cm = ConfusionMatrix::from_binary(428, 497, 15, 12);
    let mut report = scalar_metrics(&cm, Averaging::Binary)?;
    report.auc = Some(0.99830);
    let names = vec!["normal".to_string(), "covid".to_string()];
    println!("{}", ClassificationReport::from_metrics(&report, &names));

    let claimed = ClaimedMetrics {
        accuracy: Some(0.98004),
        precision: Some(0.96882),
        recall: Some(0.98864),
        f1: Some(0.97863),
        auc: None,
    };
    for w in consistency_warnings(&report, &claimed, 1e-4) {
        println!("warning: {w}");
    }

    // a model that calls everything covid: precision collapses to prevalence
    let all_positive = ConfusionMatrix::from_binary(440, 0, 512, 0);
    let degenerate = scalar_metrics(&all_positive, Averaging::Binary)?;
    println!("\nall-positive precision {:.5} = 440/952", degenerate.precision);

    let labels = [0, 0, 1, 1, 0, 1];
    let scores = [0.1, 0.4, 0.35, 0.8, 0.2, 0.9];
    let roc = roc_and_auc(&labels, &scores)?;
    println!("toy ROC: {} points, AUC {:.4}", roc.points.len(), roc.auc);

    let row = |model: &str, r: &tlbench::evaluation::MetricReport| LeaderboardRow {
        model: model.to_string(),
        accuracy: r.accuracy,
        precision: r.precision,
        recall: r.recall,
        f1: r.f1,
        auc: r.auc,
    };
    let rows = vec![row("DenseNet121", &report), row("AllPositive", &degenerate)];
    println!("\n{}", leaderboard_csv(&rows)?);
    Ok(())
}
