//! Train the offline backbone on a synthetic corpus with early stopping and
//! learning-rate reduction, then save the history and curves.

use tlbench::data_model::{stratified_split, CurationLog, SplitSpec, StratumKey};
use tlbench::modelzoo::{build_model, BackboneSpec, HeadConfig, ModelSpec, OptimizerFamily, OptimizerSpec};
use tlbench::pipeline::{BatchingConfig, ImageDataset, ImageStore};
use tlbench::synth::{generate, SynthConfig};
use tlbench::trainer::{set_global_seed, train, TrainConfig};

fn main() -> tlbench::Result<()> {
    let root = std::env::temp_dir().join("tlbench-train");
    let corpus = generate(
        &SynthConfig {
            count: 400,
            image_size: 24,
            ..SynthConfig::default()
        },
        &root.join("corpus"),
    )?;
    let spec = SplitSpec::new([0.7, 0.3, 0.0], vec![StratumKey::Label], 42)?;
    let split = stratified_split(&corpus.manifest, &spec, &mut CurationLog::new())?;
    let store = ImageStore::new(root.join("corpus"));
    let train_data = ImageDataset::load(&split.train, &store, (24, 24), 2)?;
    let val_data = ImageDataset::load(&split.val, &store, (24, 24), 2)?;

    let seeds = set_global_seed(42);
    let mut model = build_model(&ModelSpec {
        backbone: BackboneSpec::synthetic_tiny(),
        head: HeadConfig {
            dense_units: 32,
            ..HeadConfig::default()
        },
        freeze_rate: 0.0,
        input_size: [24, 24],
        seed: seeds.init,
        bn_momentum: 0.9,
    })?;
    let optimizer = OptimizerSpec {
        family: OptimizerFamily::Adam,
        learning_rate: 1e-3,
        weight_decay: 0.0,
    };
    let config = TrainConfig {
        max_epochs: 8,
        checkpoint_dir: Some(root.join("checkpoints")),
        seed: 42,
        ..TrainConfig::default()
    };
    let batching = BatchingConfig {
        batch_size: 32,
        ..BatchingConfig::default()
    };
    let mut report = |row: &tlbench::trainer::HistoryRow| {
        println!(
            "epoch {:>2}  loss {:.4}  acc {:.3}  val_loss {:.4}  val_acc {:.3}  lr {:.1e}",
            row.epoch, row.train_loss, row.train_acc, row.val_loss, row.val_acc, row.lr
        );
    };
    let history = train(
        &mut model,
        &optimizer,
        &train_data,
        &val_data,
        &batching,
        &config,
        Some(&mut report),
    )?;
    if let Some(best) = history.best_row() {
        println!("best epoch {} with val_loss {:.4}", best.epoch, best.val_loss);
    }
    history.write_csv(&root.join("history.csv"))?;
    history.plot(&root)?;
    println!("history and curves in {}", root.display());
    Ok(())
}
