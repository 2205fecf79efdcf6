//! Plan per-country balancing and fill the gaps with augmented copies.

use std::collections::BTreeMap;

use tlbench::data_model::Label;
use tlbench::pipeline::{apply_augmentation, execute_plan, plan_balancing, AugmentationPolicy, ImageStore};
use tlbench::synth::{generate, SynthConfig};

fn main() -> tlbench::Result<()> {
    let root = std::env::temp_dir().join("tlbench-balance");
    let corpus = generate(
        &SynthConfig {
            count: 160,
            image_size: 32,
            ..SynthConfig::default()
        },
        &root.join("corpus"),
    )?;
    let manifest = &corpus.manifest;
    println!("before: {:?}", manifest.counts().by_country_label);

    let targets = BTreeMap::from([(Label::Covid, 20), (Label::Normal, 20)]);
    let plan = plan_balancing(&manifest.counts().by_country_label, &targets, true)?;
    println!("{plan}");

    let policy = AugmentationPolicy::default();
    let store = ImageStore::new(root.join("corpus"));
    let balanced = execute_plan(manifest, &plan, &policy, &store, &root.join("staging"))?;
    println!("after: {:?}", balanced.counts().by_country_label);

    // the same (image, draw) pair always yields the same transform
    let image = store.load(&manifest.records()[0].image_ref, None)?;
    for draw in 0..3 {
        let params = policy.sample(0, draw);
        println!("draw {draw}: {params:?}");
        apply_augmentation(&image, &policy, 0, draw).save_png(root.join(format!("augmented_{draw}.png")))?;
    }
    println!("samples written to {}", root.display());
    Ok(())
}
