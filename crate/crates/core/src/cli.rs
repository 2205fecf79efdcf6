//! Subcommands driven by one JSON run configuration.
//!
//! Every subcommand reads and writes under `out_dir`:
//!
//! ```text
//! synth/      images/, manifest.csv, geometry.csv
//! curated/    train.csv, val.csv, test.csv, curation_log.txt, summary.json
//! staging/    augmented/<country>/<label>/...   (TLBENCH_STAGING_DIR overrides)
//! train/<m>/  model.safetensors, history.csv, checkpoints, plots
//! tune/       trials/, leaderboard.csv, best.json
//! reports/<m>/ metrics.json, report.txt, confusion.png, roc.png
//! explain/<m>/ heatmap and overlay PNGs, cam_summary.csv
//! ```
//!
//! Section seeds are overwritten: each subcommand draws from
//! `rng::derive(seed, <subcommand>)`.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::data_model::{
    assign_age_groups, drop_low_sample_countries, impute_age, impute_sex, load_manifest, stratified_split, undersample,
    write_manifest, AgeImputation, CurationLog, DatasetManifest, Label, SplitSpec, StratumKey,
};
use crate::error::{Error, Result};
use crate::evaluation::{
    collect_leaderboard, consistency_warnings, evaluate, leaderboard_csv, ClaimedMetrics, EvaluationRecord,
    LeaderboardRow,
};
use crate::explain::{grad_cam, heatmap_image, overlay, save_rgb, CamTarget};
use crate::modelzoo::{
    build_model, load_checkpoint, save_checkpoint, BackboneSpec, HeadConfig, ModelSpec, OptimizerSpec, Provenance,
    DEFAULT_BN_MOMENTUM,
};
use crate::pipeline::{
    decode_and_preprocess, execute_plan, plan_balancing, stack, AugmentationPolicy, BatchingConfig, ImageDataset,
    ImageStore,
};
use crate::rng;
use crate::synth::{generate, SynthConfig, SynthCorpus};
use crate::trainer::{set_global_seed, train, TrainConfig, TrainingHistory};
use crate::tuner::{run_search, SearchOutcome, SearchSpace, TrainingObjective, TunerConfig};

pub const STAGING_ENV: &str = "TLBENCH_STAGING_DIR";
pub const SUBCOMMANDS: [&str; 7] = ["curate", "synth", "train", "tune", "evaluate", "explain", "report"];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub out_dir: PathBuf,
    pub synth: SynthConfig,
    pub data: DataSection,
    pub pipeline: PipelineSection,
    pub model: ModelSection,
    pub train: TrainConfig,
    pub tune: TuneSection,
    pub eval: EvalSection,
    pub explain: ExplainSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: rng::DEFAULT_SEED,
            out_dir: PathBuf::from("out"),
            synth: SynthConfig::default(),
            data: DataSection::default(),
            pipeline: PipelineSection::default(),
            model: ModelSection::default(),
            train: TrainConfig::default(),
            tune: TuneSection::default(),
            eval: EvalSection::default(),
            explain: ExplainSection::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataSection {
    /// Defaults to `<out_dir>/synth/manifest.csv`.
    pub manifest: Option<PathBuf>,
    /// Directory relative image refs resolve against; defaults to the
    /// manifest's directory.
    pub image_root: Option<PathBuf>,
    pub imputation: AgeImputation,
    pub min_country_count: usize,
    pub caps: BTreeMap<String, usize>,
    pub split: SplitSpec,
}

impl Default for DataSection {
    fn default() -> Self {
        Self {
            manifest: None,
            image_root: None,
            imputation: AgeImputation::default(),
            min_country_count: 0,
            caps: BTreeMap::new(),
            split: SplitSpec {
                fractions: [0.7, 0.15, 0.15],
                strata_keys: vec![StratumKey::Label, StratumKey::AgeGroup],
                seed: rng::DEFAULT_SEED,
            },
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineSection {
    /// `(height, width)`
    pub image_size: [usize; 2],
    pub batching: BatchingConfig,
    pub augmentation: AugmentationPolicy,
    /// Per-country targets applied to the training split.
    pub balancing: Option<BalancingSection>,
}

impl Default for PipelineSection {
    fn default() -> Self {
        Self {
            image_size: [64, 64],
            batching: BatchingConfig::default(),
            augmentation: AugmentationPolicy::default(),
            balancing: None,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BalancingSection {
    pub targets: BTreeMap<Label, usize>,
    #[serde(default)]
    pub allow_downsampling: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSection {
    /// Report and artifact name; defaults to the backbone name.
    pub name: Option<String>,
    pub backbone: BackboneSpec,
    pub head: HeadConfig,
    pub optimizer: OptimizerSpec,
    pub freeze_rate: f64,
    pub bn_momentum: f64,
}

impl Default for ModelSection {
    fn default() -> Self {
        Self {
            name: None,
            backbone: BackboneSpec::synthetic_tiny(),
            head: HeadConfig::default(),
            optimizer: OptimizerSpec::default(),
            freeze_rate: 0.0,
            bn_momentum: DEFAULT_BN_MOMENTUM,
        }
    }
}

impl ModelSection {
    pub fn display_name(&self) -> String {
        self.name.clone().unwrap_or_else(|| self.backbone.name.to_string())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TuneSection {
    pub space: SearchSpace,
    pub max_epochs: usize,
    pub eta: usize,
    pub workers: usize,
}

impl Default for TuneSection {
    fn default() -> Self {
        let t = TunerConfig::default();
        Self {
            space: SearchSpace::default(),
            max_epochs: t.max_epochs,
            eta: t.eta,
            workers: t.workers,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSection {
    pub threshold: f64,
    /// Defaults to `<out_dir>/reports`.
    pub report_dir: Option<PathBuf>,
    /// Leaderboard row order; unlisted models follow by name.
    pub model_order: Vec<String>,
    /// Published values per model name, checked after evaluation.
    pub claimed: BTreeMap<String, ClaimedMetrics>,
    pub claim_tolerance: f64,
}

impl Default for EvalSection {
    fn default() -> Self {
        Self {
            threshold: 0.5,
            report_dir: None,
            model_order: Vec::new(),
            claimed: BTreeMap::new(),
            claim_tolerance: 1e-4,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExplainSection {
    /// Number of test images to explain when no image is given.
    pub count: usize,
    pub layer: Option<String>,
    pub alpha: f64,
    pub image: Option<PathBuf>,
    pub checkpoint: Option<PathBuf>,
}

impl Default for ExplainSection {
    fn default() -> Self {
        Self {
            count: 8,
            layer: None,
            alpha: 0.4,
            image: None,
            checkpoint: None,
        }
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let config: RunConfig = serde_json::from_str(text).map_err(|e| Error::config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).map_err(|e| Error::config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text).map_err(|e| e.context(format!("config {}", path.display())))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn with_overrides(mut self, seed: Option<u64>, out_dir: Option<PathBuf>) -> Self {
        if let Some(s) = seed {
            self.seed = s;
        }
        if let Some(o) = out_dir {
            self.out_dir = o;
        }
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.synth.validate()?;
        self.data.split.validate()?;
        let [h, w] = self.pipeline.image_size;
        if h == 0 || w == 0 {
            return Err(Error::config("pipeline.image_size must be positive"));
        }
        self.pipeline.batching.validate()?;
        self.pipeline.augmentation.validate()?;
        self.model.head.validate()?;
        self.model.optimizer.validate()?;
        if !(0.0..=1.0).contains(&self.model.freeze_rate) {
            return Err(Error::range("freeze_rate", self.model.freeze_rate, "[0, 1]"));
        }
        if !(self.model.bn_momentum > 0.0 && self.model.bn_momentum < 1.0) {
            return Err(Error::range("bn_momentum", self.model.bn_momentum, "(0, 1)"));
        }
        self.train.validate()?;
        self.tune.space.validate()?;
        if self.tune.eta < 2 || self.tune.max_epochs == 0 || self.tune.workers == 0 {
            return Err(Error::config("tune needs eta >= 2, max_epochs >= 1 and workers >= 1"));
        }
        if !(0.0..=1.0).contains(&self.eval.threshold) {
            return Err(Error::range("eval.threshold", self.eval.threshold, "[0, 1]"));
        }
        if !(0.0..=1.0).contains(&self.explain.alpha) {
            return Err(Error::range("explain.alpha", self.explain.alpha, "[0, 1]"));
        }
        Ok(())
    }

    pub fn seed_for(&self, subcommand: &str) -> u64 {
        rng::derive(self.seed, subcommand)
    }

    pub fn synth_dir(&self) -> PathBuf {
        self.out_dir.join("synth")
    }

    pub fn curated_dir(&self) -> PathBuf {
        self.out_dir.join("curated")
    }

    /// `$TLBENCH_STAGING_DIR`, else `<out_dir>/staging`.
    pub fn staging_dir(&self) -> PathBuf {
        match std::env::var_os(STAGING_ENV) {
            Some(v) if !v.is_empty() => PathBuf::from(v),
            _ => self.out_dir.join("staging"),
        }
    }

    pub fn train_dir(&self) -> PathBuf {
        self.out_dir.join("train").join(self.model.display_name())
    }

    pub fn checkpoint_path(&self) -> PathBuf {
        self.train_dir().join("model.safetensors")
    }

    pub fn tune_dir(&self) -> PathBuf {
        self.out_dir.join("tune")
    }

    pub fn reports_dir(&self) -> PathBuf {
        self.eval
            .report_dir
            .clone()
            .unwrap_or_else(|| self.out_dir.join("reports"))
    }

    pub fn explain_dir(&self) -> PathBuf {
        self.out_dir.join("explain").join(self.model.display_name())
    }

    pub fn class_names(&self) -> Vec<String> {
        match self.model.head.num_classes {
            2 => vec!["normal".to_string(), "covid".to_string()],
            k => (0..k)
                .map(|i| match i {
                    0 => "normal".to_string(),
                    1 => "covid".to_string(),
                    2 => "other_pneumonia".to_string(),
                    _ => format!("class_{i}"),
                })
                .collect(),
        }
    }

    /// The model spec with the `train` seed fanned out to initialization.
    pub fn model_spec(&self) -> ModelSpec {
        ModelSpec {
            backbone: self.model.backbone.clone(),
            head: self.model.head.clone(),
            freeze_rate: self.model.freeze_rate,
            input_size: self.pipeline.image_size,
            seed: set_global_seed(self.seed_for("train")).init,
            bn_momentum: self.model.bn_momentum,
        }
    }
}

fn require(path: &Path, producer: &'static str) -> Result<()> {
    if path.exists() {
        Ok(())
    } else {
        Err(Error::MissingArtifact {
            path: path.to_path_buf(),
            producer,
        })
    }
}

fn absolute(path: &Path) -> Result<PathBuf> {
    Ok(std::path::absolute(path)?)
}

pub fn cmd_synth(config: &RunConfig) -> Result<SynthCorpus> {
    let synth = SynthConfig {
        seed: config.seed_for("synth"),
        ..config.synth.clone()
    };
    generate(&synth, &config.synth_dir()).map_err(|e| e.context("synth"))
}

/// Written next to the curated splits so later subcommands can resolve
/// image refs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurateSummary {
    pub source_manifest: PathBuf,
    pub image_root: PathBuf,
    pub input_records: usize,
    pub curated_records: usize,
    /// train, val, test
    pub sizes: [usize; 3],
    pub synthetic_records: usize,
    pub actions: usize,
    pub warnings: Vec<String>,
}

#[derive(Clone, Debug)]
pub struct CurateOutput {
    pub train: DatasetManifest,
    pub val: DatasetManifest,
    pub test: DatasetManifest,
    pub log: CurationLog,
    pub summary: CurateSummary,
}

/// Imputation, age grouping, country filtering and per-country caps, in
/// that order.
pub fn curate_manifest(
    manifest: &DatasetManifest,
    config: &RunConfig,
    log: &mut CurationLog,
) -> Result<DatasetManifest> {
    let m = impute_age(manifest, config.data.imputation, log)?;
    let m = impute_sex(&m, log)?;
    let m = assign_age_groups(&m, log)?;
    let m = drop_low_sample_countries(&m, config.data.min_country_count, log)?;
    undersample(&m, &config.data.caps, config.seed_for("curate"), log)
}

pub fn cmd_curate(config: &RunConfig) -> Result<CurateOutput> {
    curate_inner(config).map_err(|e| e.context("curate"))
}

fn curate_inner(config: &RunConfig) -> Result<CurateOutput> {
    let manifest_path = config
        .data
        .manifest
        .clone()
        .unwrap_or_else(|| config.synth_dir().join("manifest.csv"));
    require(&manifest_path, "synth")?;
    let image_root = match &config.data.image_root {
        Some(r) => absolute(r)?,
        None => absolute(manifest_path.parent().unwrap_or(Path::new(".")))?,
    };
    let input = load_manifest(&manifest_path)?;
    let mut log = CurationLog::new();
    let curated = curate_manifest(&input, config, &mut log)?;
    let spec = SplitSpec {
        seed: config.seed_for("curate"),
        ..config.data.split.clone()
    };
    let split = stratified_split(&curated, &spec, &mut log)?;
    let mut train = split.train;
    let mut synthetic_records = 0;
    if let Some(bal) = &config.pipeline.balancing {
        let mut counts = BTreeMap::new();
        for r in train.records() {
            *counts.entry((r.country.clone(), r.label)).or_insert(0) += 1;
        }
        let plan = plan_balancing(&counts, &bal.targets, bal.allow_downsampling)?;
        let policy = AugmentationPolicy {
            seed: config.seed_for("balance"),
            ..config.pipeline.augmentation.clone()
        };
        let store = ImageStore::new(&image_root);
        let balanced = execute_plan(&train, &plan, &policy, &store, &absolute(&config.staging_dir())?)?;
        synthetic_records = plan.total_synth();
        train = balanced;
    }
    let dir = config.curated_dir();
    write_manifest(dir.join("train.csv"), &train)?;
    write_manifest(dir.join("val.csv"), &split.val)?;
    write_manifest(dir.join("test.csv"), &split.test)?;
    std::fs::write(dir.join("curation_log.txt"), log.to_string())?;
    let summary = CurateSummary {
        source_manifest: manifest_path,
        image_root,
        input_records: input.len(),
        curated_records: curated.len(),
        sizes: [train.len(), split.val.len(), split.test.len()],
        synthetic_records,
        actions: log.len(),
        warnings: split.warnings,
    };
    std::fs::write(dir.join("summary.json"), serde_json::to_string_pretty(&summary)?)?;
    Ok(CurateOutput {
        train,
        val: split.val,
        test: split.test,
        log,
        summary,
    })
}

fn read_summary(config: &RunConfig) -> Result<CurateSummary> {
    let path = config.curated_dir().join("summary.json");
    require(&path, "curate")?;
    Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
}

/// Decodes one curated split (`train`, `val` or `test`).
pub fn load_split(config: &RunConfig, split: &str) -> Result<ImageDataset> {
    let summary = read_summary(config)?;
    let path = config.curated_dir().join(format!("{split}.csv"));
    require(&path, "curate")?;
    let manifest = load_manifest(&path)?;
    let [h, w] = config.pipeline.image_size;
    ImageDataset::load(
        &manifest,
        &ImageStore::new(summary.image_root),
        (h, w),
        config.model.head.num_classes,
    )
}

#[derive(Clone, Debug)]
pub struct TrainOutput {
    pub history: TrainingHistory,
    pub checkpoint: PathBuf,
}

pub fn cmd_train(config: &RunConfig) -> Result<TrainOutput> {
    train_inner(config).map_err(|e| e.context("train"))
}

fn train_inner(config: &RunConfig) -> Result<TrainOutput> {
    let train_data = load_split(config, "train")?;
    let val_data = load_split(config, "val")?;
    let mut model = build_model(&config.model_spec())?;
    let dir = config.train_dir();
    let tc = TrainConfig {
        seed: config.seed_for("train"),
        checkpoint_dir: Some(dir),
        ..config.train.clone()
    };
    let history = train(
        &mut model,
        &config.model.optimizer,
        &train_data,
        &val_data,
        &config.pipeline.batching,
        &tc,
        None,
    )?;
    let checkpoint = config.checkpoint_path();
    let provenance = Provenance::new(&model, Some(&config.model.optimizer), history.best_epoch);
    save_checkpoint(&model, &checkpoint, &provenance)?;
    Ok(TrainOutput { history, checkpoint })
}

pub fn cmd_tune(config: &RunConfig) -> Result<SearchOutcome> {
    (|| {
        let train_data = load_split(config, "train")?;
        let val_data = load_split(config, "val")?;
        let objective = TrainingObjective {
            base: config.model_spec(),
            train: &train_data,
            val: &val_data,
            batching: config.pipeline.batching.clone(),
            train_config: config.train.clone(),
        };
        let tc = TunerConfig {
            max_epochs: config.tune.max_epochs,
            eta: config.tune.eta,
            seed: config.seed_for("tune"),
            workers: config.tune.workers,
            tuning_dir: Some(config.tune_dir()),
        };
        run_search(&config.tune.space, &objective, &tc)
    })()
    .map_err(|e: Error| e.context("tune"))
}

fn checkpoint_for(config: &RunConfig) -> Result<PathBuf> {
    let path = config
        .explain
        .checkpoint
        .clone()
        .unwrap_or_else(|| config.checkpoint_path());
    require(&path, "train")?;
    Ok(path)
}

pub fn cmd_evaluate(config: &RunConfig) -> Result<EvaluationRecord> {
    (|| {
        let path = config.checkpoint_path();
        require(&path, "train")?;
        let mut model = load_checkpoint(&path)?;
        let test = load_split(config, "test")?;
        let name = config.model.display_name();
        let mut record = evaluate(&mut model, &test, &name, &config.class_names(), config.eval.threshold)?;
        if let Some(claimed) = config.eval.claimed.get(&name) {
            record.warnings.extend(consistency_warnings(
                &record.metrics,
                claimed,
                config.eval.claim_tolerance,
            ));
        }
        record.write(&config.reports_dir().join(&name))?;
        Ok(record)
    })()
    .map_err(|e: Error| e.context("evaluate"))
}

/// One explained image.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CamRecord {
    pub image_ref: String,
    pub score: f64,
    pub heatmap_max: f64,
    pub zero_gradient: bool,
    pub heatmap: PathBuf,
    pub overlay: PathBuf,
}

pub fn cmd_explain(config: &RunConfig) -> Result<Vec<CamRecord>> {
    explain_inner(config).map_err(|e| e.context("explain"))
}

fn explain_inner(config: &RunConfig) -> Result<Vec<CamRecord>> {
    let mut model = load_checkpoint(&checkpoint_for(config)?)?;
    let [h, w] = model.spec.input_size;
    let images = match &config.explain.image {
        Some(p) => {
            require(p, "synth")?;
            vec![(p.to_string_lossy().into_owned(), decode_and_preprocess(p, (h, w))?)]
        }
        None => {
            let test = load_split(config, "test")?;
            test.refs
                .into_iter()
                .zip(test.images)
                .take(config.explain.count)
                .collect()
        }
    };
    let dir = config.explain_dir();
    std::fs::create_dir_all(&dir)?;
    let mut out = Vec::with_capacity(images.len());
    for (image_ref, img) in &images {
        let score = model.predict(&stack(&[img])?)?[0][0];
        let cam = grad_cam(&mut model, img, CamTarget::Predicted, config.explain.layer.as_deref())?;
        let stem = Path::new(image_ref)
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "image".to_string());
        let heatmap = dir.join(format!("{stem}_heatmap.png"));
        let overlay_path = dir.join(format!("{stem}_overlay.png"));
        save_rgb(&heatmap_image(&cam), &heatmap)?;
        save_rgb(&overlay(img, &cam, config.explain.alpha)?, &overlay_path)?;
        out.push(CamRecord {
            image_ref: image_ref.clone(),
            score,
            heatmap_max: cam.max(),
            zero_gradient: cam.zero_gradient,
            heatmap,
            overlay: overlay_path,
        });
    }
    let mut w = csv::Writer::from_path(dir.join("cam_summary.csv"))?;
    for r in &out {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(out)
}

#[derive(Clone, Debug)]
pub struct ReportOutput {
    pub rows: Vec<LeaderboardRow>,
    pub csv_path: PathBuf,
    pub markdown_path: PathBuf,
}

pub fn leaderboard_markdown(rows: &[LeaderboardRow]) -> String {
    let mut s = String::from("| Model | Accuracy | Precision | Recall | F1 | AUC |\n|---|---|---|---|---|---|\n");
    for r in rows {
        let auc = r.auc.map(|a| format!("{a:.5}")).unwrap_or_else(|| "n/a".to_string());
        let _ = writeln!(
            s,
            "| {} | {:.5} | {:.5} | {:.5} | {:.5} | {auc} |",
            r.model, r.accuracy, r.precision, r.recall, r.f1
        );
    }
    s
}

pub fn cmd_report(config: &RunConfig) -> Result<ReportOutput> {
    (|| {
        let root = config.reports_dir();
        let rows = collect_leaderboard(&root, &config.eval.model_order)?;
        let csv_path = root.join("leaderboard.csv");
        let markdown_path = root.join("leaderboard.md");
        std::fs::write(&csv_path, leaderboard_csv(&rows)?)?;
        std::fs::write(&markdown_path, leaderboard_markdown(&rows))?;
        Ok(ReportOutput {
            rows,
            csv_path,
            markdown_path,
        })
    })()
    .map_err(|e: Error| e.context("report"))
}

/// Runs one subcommand by name and returns a short human-readable summary.
pub fn run(subcommand: &str, config: &RunConfig) -> Result<String> {
    Ok(match subcommand {
        "synth" => {
            let c = cmd_synth(config)?;
            format!("wrote {} images and {}", c.manifest.len(), c.manifest_path.display())
        }
        "curate" => {
            let c = cmd_curate(config)?;
            let [tr, va, te] = c.summary.sizes;
            format!(
                "curated {} of {} records: train {tr}, val {va}, test {te} ({} actions)",
                c.summary.curated_records, c.summary.input_records, c.summary.actions
            )
        }
        "train" => {
            let t = cmd_train(config)?;
            let mut s = format!("trained {} epochs", t.history.rows.len());
            if let Some(best) = t.history.best_row() {
                let _ = write!(
                    s,
                    ", best epoch {} (val_loss {:.5}, val_acc {:.5})",
                    best.epoch, best.val_loss, best.val_acc
                );
            }
            let _ = write!(s, "; wrote {}", t.checkpoint.display());
            s
        }
        "tune" => {
            let o = cmd_tune(config)?;
            format!(
                "{} trials; best objective {:.5}: {:?}",
                o.trials.len(),
                o.best_objective,
                o.best
            )
        }
        "evaluate" => {
            let r = cmd_evaluate(config)?;
            let mut s = format!("{}\n{}", r.model, r.metrics);
            for w in &r.warnings {
                let _ = write!(s, "\nwarning: {w}");
            }
            s
        }
        "explain" => {
            let v = cmd_explain(config)?;
            format!("wrote {} heatmaps to {}", v.len(), config.explain_dir().display())
        }
        "report" => {
            let r = cmd_report(config)?;
            format!("{}\n{}", r.csv_path.display(), leaderboard_markdown(&r.rows))
        }
        other => return Err(Error::config(format!("unknown subcommand `{other}`"))),
    })
}
