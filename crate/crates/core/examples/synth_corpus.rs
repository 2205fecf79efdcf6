//! Generate a small synthetic chest-image corpus and summarize its manifest.
//!
//! Covid-labelled images carry a bright ellipse; geometry.csv records where.

use tlbench::synth::{generate, SynthConfig};

fn main() -> tlbench::Result<()> {
    let dir = std::env::temp_dir().join("tlbench-synth-corpus");
    let config = SynthConfig {
        count: 200,
        image_size: 32,
        ..SynthConfig::default()
    };
    let corpus = generate(&config, &dir)?;
    let counts = corpus.manifest.counts();
    println!("wrote {} images under {}", counts.total, dir.display());
    println!("labels: {:?}", counts.by_label);
    println!("countries: {:?}", counts.by_country);
    println!(
        "missing age {} / missing sex {}",
        counts.missing_age, counts.missing_sex
    );
    println!("{}", corpus.manifest.imbalance());
    for g in corpus.geometry.iter().take(3) {
        println!(
            "{}: centre ({:.1}, {:.1}) axes ({:.1}, {:.1}) angle {:.2}",
            g.image_ref, g.cx, g.cy, g.rx, g.ry, g.angle
        );
    }
    Ok(())
}
