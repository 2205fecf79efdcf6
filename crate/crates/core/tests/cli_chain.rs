mod common;

use std::collections::BTreeSet;

use tlbench::cli::*;
use tlbench::data_model::{load_manifest, write_manifest, CurationLog, SplitSpec};
use tlbench::error::Error;

#[test]
fn full_chain_runs_from_one_config() {
    let dir = tempfile::tempdir().unwrap();
    let c = common::small_config(dir.path());

    let corpus = cmd_synth(&c).unwrap();
    assert_eq!(corpus.manifest.len(), 120);

    let cur = cmd_curate(&c).unwrap();
    assert_eq!(cur.summary.sizes.iter().sum::<usize>(), 120);
    let log_text = std::fs::read_to_string(c.curated_dir().join("curation_log.txt")).unwrap();
    assert_eq!(log_text.lines().count(), cur.log.len());

    let trained = cmd_train(&c).unwrap();
    assert_eq!(trained.history.rows.len(), 2);
    assert!(trained.checkpoint.is_file());
    assert!(c.train_dir().join("history.csv").is_file());

    let rec = cmd_evaluate(&c).unwrap();
    assert_eq!(rec.metrics.total, cur.summary.sizes[2] as u64);
    assert!(c.reports_dir().join("SyntheticTiny/metrics.json").is_file());

    let cams = cmd_explain(&c).unwrap();
    assert_eq!(cams.len(), 3);
    for cam in &cams {
        assert!(cam.heatmap.is_file() && cam.overlay.is_file());
        assert!(cam.zero_gradient || cam.heatmap_max == 1.0);
    }

    let report = cmd_report(&c).unwrap();
    assert_eq!(report.rows.len(), 1);
    let csv = std::fs::read_to_string(&report.csv_path).unwrap();
    assert!(csv.starts_with("Model,Accuracy,Precision,Recall,F1,AUC\nSyntheticTiny,"));
}

#[test]
fn tune_writes_trials_and_best() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = common::small_config(dir.path());
    c.synth.count = 60;
    c.tune.space.dense_units = vec![8, 16];
    cmd_synth(&c).unwrap();
    cmd_curate(&c).unwrap();
    let out = cmd_tune(&c).unwrap();
    // (3, 3): bracket s=1 runs 3 configs at 1 epoch then 1 at 3; s=0 runs 2 at 3
    assert_eq!(out.trials.len(), 6);
    let best = out.trials.iter().map(|t| t.score()).fold(f64::NEG_INFINITY, f64::max);
    assert_eq!(out.best_objective, best);
    assert!(c.tune_dir().join("best.json").is_file());
    assert!(c.tune_dir().join("leaderboard.csv").is_file());
}

#[test]
fn curation_is_deterministic_and_a_fixed_point() {
    let dir = tempfile::tempdir().unwrap();
    let c = common::small_config(dir.path());
    cmd_synth(&c).unwrap();
    let first = cmd_curate(&c).unwrap();
    let bytes: Vec<Vec<u8>> = ["train.csv", "val.csv", "test.csv"]
        .iter()
        .map(|f| std::fs::read(c.curated_dir().join(f)).unwrap())
        .collect();
    cmd_curate(&c).unwrap();
    for (f, b) in ["train.csv", "val.csv", "test.csv"].iter().zip(&bytes) {
        assert_eq!(&std::fs::read(c.curated_dir().join(f)).unwrap(), b, "{f}");
    }

    // curating already-curated records changes nothing
    let union: Vec<_> = [&first.train, &first.val, &first.test]
        .iter()
        .flat_map(|m| m.records().iter().cloned())
        .collect();
    let union = tlbench::data_model::DatasetManifest::new(union).unwrap();
    let reloaded = {
        let p = dir.path().join("union.csv");
        write_manifest(&p, &union).unwrap();
        load_manifest(&p).unwrap()
    };
    let mut log = CurationLog::new();
    let again = curate_manifest(&reloaded, &c, &mut log).unwrap();
    // age groups are derived and not stored, so only their assignment recurs
    let ops: Vec<&str> = log.actions().iter().map(|a| a.operation.as_str()).collect();
    assert_eq!(ops, ["assign_age_groups"]);
    let content = |m: &tlbench::data_model::DatasetManifest| {
        m.records()
            .iter()
            .map(|r| format!("{}|{}|{}|{:?}|{:?}", r.image_ref, r.label, r.country, r.age, r.sex))
            .collect::<BTreeSet<_>>()
    };
    assert_eq!(content(&again), content(&union));
}

#[test]
fn published_sizes_fixture_splits_8842_2210() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = common::small_config(dir.path());
    let manifest_path = dir.path().join("published.csv");
    write_manifest(&manifest_path, &common::published_manifest()).unwrap();
    c.data.manifest = Some(manifest_path);
    c.data.split = SplitSpec {
        fractions: [0.8, 0.2, 0.0],
        ..c.data.split.clone()
    };
    let out = cmd_curate(&c).unwrap();
    assert_eq!(out.summary.sizes, [8842, 2210, 0]);
}

#[test]
fn balancing_writes_to_the_staging_dir() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = common::small_config(dir.path());
    c.synth.countries = vec![("A".into(), 1.0), ("B".into(), 1.0)];
    cmd_synth(&c).unwrap();
    c.pipeline.balancing = Some(BalancingSection {
        targets: [
            (tlbench::data_model::Label::Covid, 40),
            (tlbench::data_model::Label::Normal, 40),
        ]
        .into(),
        allow_downsampling: true,
    });
    let out = cmd_curate(&c).unwrap();
    assert_eq!(out.train.len(), 160);
    let staged = out
        .train
        .records()
        .iter()
        .filter(|r| r.image_ref.contains("augmented"))
        .count();
    assert_eq!(staged, out.summary.synthetic_records);
    assert!(c.staging_dir().join("augmented/A/covid").is_dir());
    // staged images load through the recorded image root
    let train = load_split(&c, "train").unwrap();
    assert_eq!(train.len(), 160);
}

#[test]
fn module_errors_carry_subcommand_context() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = common::small_config(dir.path());
    cmd_synth(&c).unwrap();
    c.data.min_country_count = 10_000;
    let err = cmd_curate(&c).unwrap_err();
    assert!(err.to_string().starts_with("curate: "), "{err}");
    assert!(matches!(err.root(), Error::EmptyDataset(_)));
}
