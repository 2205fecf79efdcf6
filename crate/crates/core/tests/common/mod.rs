#![allow(dead_code)]

use std::path::Path;

use tlbench::cli::RunConfig;
use tlbench::data_model::{DatasetManifest, Label, Modality, PatientRecord, Sex};
use tlbench::synth::SynthConfig;

/// A small, fast configuration rooted at `out`.
pub fn small_config(out: &Path) -> RunConfig {
    let mut c = RunConfig {
        out_dir: out.to_path_buf(),
        ..RunConfig::default()
    };
    c.synth = SynthConfig {
        count: 120,
        image_size: 16,
        ..SynthConfig::default()
    };
    c.pipeline.image_size = [16, 16];
    c.pipeline.batching.batch_size = 32;
    c.model.head.dense_units = 16;
    c.model.bn_momentum = 0.9;
    c.model.optimizer = tlbench::modelzoo::OptimizerSpec {
        family: tlbench::modelzoo::OptimizerFamily::Adam,
        learning_rate: 1e-3,
        weight_decay: 0.0,
    };
    c.train.max_epochs = 2;
    c.tune.max_epochs = 3;
    c.explain.count = 3;
    c
}

/// Six countries with the published post-undersampling sizes, trimmed to the
/// reported 11,052 total; labels apportioned 7,572 covid overall.
pub fn published_countries() -> Vec<(&'static str, usize, usize)> {
    // (country, covid, normal)
    vec![
        ("Spain", 2049, 943),
        ("China", 2020, 929),
        ("USA", 1206, 555),
        ("France", 1045, 481),
        ("Russia", 760, 346),
        ("Iran", 492, 226),
    ]
}

pub fn published_manifest() -> DatasetManifest {
    let mut records = Vec::new();
    for (country, covid, normal) in published_countries() {
        for (label, n) in [(Label::Covid, covid), (Label::Normal, normal)] {
            for i in 0..n {
                records.push(PatientRecord {
                    image_ref: format!("{country}/{label}/{i:05}.png"),
                    label,
                    country: country.to_string(),
                    age: Some((i * 37 % 90) as f64 + 5.0),
                    sex: Some(if i % 2 == 0 { Sex::Female } else { Sex::Male }),
                    modality: Modality::Xray,
                    source: "fixture".to_string(),
                    age_group: None,
                });
            }
        }
    }
    DatasetManifest::new(records).unwrap()
}
