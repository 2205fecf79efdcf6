//! The backbone registry, freeze-layer arithmetic and the offline model.

use tlbench::modelzoo::{
    build_model, num_freeze_layers, BackboneSpec, HeadConfig, ModelSpec, DEFAULT_BN_MOMENTUM, REGISTRY,
};

fn main() -> tlbench::Result<()> {
    let rates = [0.01, 0.05, 0.10, 0.20, 0.50, 0.75];
    print!("{:<18} {:>6} {:>7} {:>7}", "backbone", "year", "top1", "layers");
    for r in rates {
        print!(" {:>5}", format!("f{r}"));
    }
    println!();
    for info in &REGISTRY {
        let fmt = |v: Option<f64>| v.map(|x| format!("{x:.1}")).unwrap_or_else(|| "-".into());
        print!(
            "{:<18} {:>6} {:>7} {:>7}",
            info.name.as_str(),
            info.year,
            fmt(info.top1_imagenet),
            info.layer_count.map(|c| c.to_string()).unwrap_or_else(|| "-".into())
        );
        for r in rates {
            match info.layer_count {
                Some(c) => print!(" {:>5}", num_freeze_layers(c, r)?),
                None => print!(" {:>5}", "-"),
            }
        }
        println!();
    }

    let spec = ModelSpec {
        backbone: BackboneSpec::synthetic_tiny(),
        head: HeadConfig::default(),
        freeze_rate: 0.5,
        input_size: [32, 32],
        seed: 1,
        bn_momentum: DEFAULT_BN_MOMENTUM,
    };
    let model = build_model(&spec)?;
    println!(
        "\nsynthetic tiny: {} params ({} trainable), {} frozen weight layers",
        model.network.param_count(),
        model.network.trainable_param_count(),
        model.frozen_layers()
    );
    for (l, shape) in model.network.layers().iter().zip(model.network.shapes()) {
        println!(
            "  {:<14} {:?} {}",
            l.name,
            &shape[1..],
            if l.trainable { "" } else { "frozen" }
        );
    }
    Ok(())
}
