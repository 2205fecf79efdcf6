//! Backbone registry, model assembly, optimizers, losses and checkpoints.

mod checkpoint;
mod loss;
mod model;
mod optim;
mod registry;
mod tiny;

pub use checkpoint::{load_checkpoint, load_provenance, save_checkpoint, sidecar_path, Provenance};
pub use loss::{build_loss, Loss, PROB_EPSILON};
pub use model::{activate, build_model, BackboneSpec, HeadConfig, Model, ModelSpec, DEFAULT_BN_MOMENTUM};
pub use optim::{build_optimizer, Optimizer, OptimizerFamily, OptimizerSpec};
pub use registry::{num_freeze_layers, BackboneInfo, BackboneName, REGISTRY};
pub use tiny::{MIN_INPUT, WEIGHT_LAYERS};

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{Layer, Mode, Tensor};

    fn spec(num_classes: usize) -> ModelSpec {
        ModelSpec {
            backbone: BackboneSpec::synthetic_tiny(),
            head: HeadConfig {
                num_classes,
                dense_units: 12,
                ..HeadConfig::default()
            },
            freeze_rate: 0.5,
            input_size: [16, 16],
            seed: 11,
            bn_momentum: DEFAULT_BN_MOMENTUM,
        }
    }

    fn batch() -> (Tensor, Vec<usize>) {
        let data = (0..4 * 3 * 16 * 16).map(|i| ((i * 53) % 97) as f64 / 97.0).collect();
        (Tensor::from_vec([4, 3, 16, 16], data).unwrap(), vec![0, 1, 1, 0])
    }

    fn objective(model: &mut Model, x: &Tensor, y: &[usize], loss: Loss) -> f64 {
        model.reseed_dropout(99);
        let logits = model.logits(x, Mode::Train).unwrap();
        loss.from_logits(&logits, y).unwrap().0 + model.network.penalty()
    }

    #[test]
    fn head_gradients_match_central_differences() {
        for classes in [2, 3] {
            let mut model = build_model(&spec(classes)).unwrap();
            let loss = build_loss(classes).unwrap();
            let (x, mut y) = batch();
            if classes == 3 {
                y[3] = 2;
            }
            model.reseed_dropout(99);
            let logits = model.logits(&x, Mode::Train).unwrap();
            let (_, g) = loss.from_logits(&logits, &y).unwrap();
            model.network.zero_grad();
            model.network.backward(&g);
            let head_start = model.backbone_layer_range().end;
            let mut checked = 0;
            for li in head_start..model.network.layers().len() {
                let names: Vec<&str> = model.network.layers()[li]
                    .layer
                    .params()
                    .iter()
                    .map(|(n, _)| *n)
                    .collect();
                for (pi, pname) in names.iter().enumerate() {
                    let (len, analytic) = {
                        let l = &mut model.network.layers_mut()[li];
                        let mut params = l.layer.params_mut();
                        let p = &mut params[pi].1;
                        p.add_penalty_grad();
                        (p.len(), p.grad.clone())
                    };
                    for j in (0..len).step_by(7) {
                        let probe = |d: f64| {
                            let mut m = model.clone();
                            m.network.layers_mut()[li].layer.params_mut()[pi].1.value[j] += d;
                            objective(&mut m, &x, &y, loss)
                        };
                        let h = 1e-5;
                        let numeric = (probe(h) - probe(-h)) / (2.0 * h);
                        let scale = numeric.abs().max(analytic[j].abs());
                        if scale < 1e-8 {
                            continue;
                        }
                        assert!(
                            (numeric - analytic[j]).abs() / scale < 1e-3,
                            "{}.{pname}[{j}]: analytic {} numeric {numeric}",
                            model.network.layers()[li].name,
                            analytic[j]
                        );
                        checked += 1;
                    }
                }
            }
            assert!(checked > 20);
        }
    }

    #[test]
    fn checkpoint_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let mut model = build_model(&spec(2)).unwrap();
        if let Layer::BatchNorm(bn) = &mut model.network.layers_mut()[1].layer {
            bn.moving_mean[0] = 0.25;
        }
        let path = dir.path().join("ckpt_epoch_001.safetensors");
        let prov = Provenance::new(&model, Some(&OptimizerSpec::manual_best()), Some(1));
        save_checkpoint(&model, &path, &prov).unwrap();
        let mut restored = load_checkpoint(&path).unwrap();
        assert_eq!(restored.network.state(), model.network.state());
        assert_eq!(restored.spec, model.spec);
        assert_eq!(load_provenance(&path).unwrap(), prov);
        let (x, _) = batch();
        assert_eq!(restored.predict(&x).unwrap(), model.predict(&x).unwrap());
    }

    #[test]
    fn corrupt_checkpoint_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.safetensors");
        std::fs::write(&path, b"garbage").unwrap();
        assert!(matches!(load_checkpoint(&path), Err(crate::Error::Checkpoint(_))));
    }
}
