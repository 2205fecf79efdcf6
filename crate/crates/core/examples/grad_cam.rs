//! Train briefly on synthetic images, then explain predictions with
//! Grad-CAM and write heatmap overlays.

use tlbench::data_model::{stratified_split, CurationLog, SplitSpec, StratumKey};
use tlbench::explain::{grad_cam, heatmap_image, overlay, save_rgb, CamTarget};
use tlbench::modelzoo::{build_model, BackboneSpec, HeadConfig, ModelSpec, OptimizerFamily, OptimizerSpec};
use tlbench::pipeline::{BatchingConfig, ImageDataset, ImageStore};
use tlbench::synth::{generate, SynthConfig};
use tlbench::trainer::{train, TrainConfig};

fn main() -> tlbench::Result<()> {
    let root = std::env::temp_dir().join("tlbench-grad-cam");
    let size = 32;
    let corpus = generate(
        &SynthConfig {
            count: 300,
            image_size: size,
            ..SynthConfig::default()
        },
        &root.join("corpus"),
    )?;
    let split = stratified_split(
        &corpus.manifest,
        &SplitSpec::new([0.8, 0.2, 0.0], vec![StratumKey::Label], 3)?,
        &mut CurationLog::new(),
    )?;
    let store = ImageStore::new(root.join("corpus"));
    let train_data = ImageDataset::load(&split.train, &store, (size, size), 2)?;
    let val_data = ImageDataset::load(&split.val, &store, (size, size), 2)?;

    let mut model = build_model(&ModelSpec {
        backbone: BackboneSpec::synthetic_tiny(),
        head: HeadConfig {
            dense_units: 32,
            ..HeadConfig::default()
        },
        freeze_rate: 0.0,
        input_size: [size, size],
        seed: 5,
        bn_momentum: 0.9,
    })?;
    let optimizer = OptimizerSpec {
        family: OptimizerFamily::Adam,
        learning_rate: 1e-3,
        weight_decay: 0.0,
    };
    let config = TrainConfig {
        max_epochs: 6,
        ..TrainConfig::default()
    };
    let batching = BatchingConfig {
        batch_size: 32,
        ..BatchingConfig::default()
    };
    let history = train(&mut model, &optimizer, &train_data, &val_data, &batching, &config, None)?;
    println!(
        "trained {} epochs, last val_acc {:.3}",
        history.rows.len(),
        history.rows.last().map_or(0.0, |r| r.val_acc)
    );

    let geometry: std::collections::HashMap<_, _> = corpus.geometry.iter().map(|g| (g.image_ref.as_str(), g)).collect();
    for (i, (image, image_ref)) in val_data.images.iter().zip(&val_data.refs).enumerate().take(6) {
        let cam = grad_cam(&mut model, image, CamTarget::Predicted, None)?;
        let stem = format!("val_{i:02}");
        save_rgb(&heatmap_image(&cam), &root.join(format!("{stem}_heatmap.png")))?;
        save_rgb(&overlay(image, &cam, 0.4)?, &root.join(format!("{stem}_overlay.png")))?;
        let inside = geometry.get(image_ref.as_str()).map(|g| {
            let (mut sum_in, mut n_in, mut sum_out, mut n_out) = (0.0, 0, 0.0, 0);
            for y in 0..cam.height {
                for x in 0..cam.width {
                    if g.contains(y as f64, x as f64) {
                        sum_in += cam.get(y, x);
                        n_in += 1;
                    } else {
                        sum_out += cam.get(y, x);
                        n_out += 1;
                    }
                }
            }
            (sum_in / n_in.max(1) as f64, sum_out / n_out.max(1) as f64)
        });
        match inside {
            Some((a, b)) => println!(
                "{image_ref}: label {} mean heat inside {a:.3} outside {b:.3}",
                val_data.labels[i]
            ),
            None => println!(
                "{image_ref}: label {} (no ellipse), zero gradient {}",
                val_data.labels[i], cam.zero_gradient
            ),
        }
    }
    println!("overlays in {}", root.display());
    Ok(())
}
