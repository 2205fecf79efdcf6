//! Drive every stage through the same entry points as the `tlbench` binary,
//! with a scaled-down copy of configs/synthetic.json.

use tlbench::cli::{run, RunConfig, SUBCOMMANDS};

fn main() -> tlbench::Result<()> {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/../../configs/synthetic.json");
    let out = std::env::temp_dir().join("tlbench-cli");
    let mut config = RunConfig::load(path.as_ref())?.with_overrides(Some(7), Some(out.clone()));
    config.synth.count = 240;
    config.synth.image_size = 24;
    config.pipeline.image_size = [24, 24];
    config.pipeline.batching.batch_size = 32;
    config.model.head.dense_units = 32;
    config.train.max_epochs = 3;
    config.tune.max_epochs = 3;
    config.explain.count = 4;

    for stage in ["synth", "curate", "train", "evaluate", "explain", "report"] {
        debug_assert!(SUBCOMMANDS.contains(&stage));
        println!("== {stage}");
        println!("{}", run(stage, &config)?);
    }
    println!("artifacts in {}", out.display());
    Ok(())
}
