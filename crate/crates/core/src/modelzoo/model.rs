use serde::{Deserialize, Serialize};

use super::registry::{num_freeze_layers, BackboneName};
use super::tiny;
use crate::error::{Error, Result};
use crate::nn::{Layer, Mode, Network, Tensor};
use crate::rng;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BackboneSpec {
    pub name: BackboneName,
    #[serde(default)]
    pub pretrained: bool,
}

impl BackboneSpec {
    pub fn new(name: BackboneName, pretrained: bool) -> Self {
        Self { name, pretrained }
    }

    pub fn synthetic_tiny() -> Self {
        Self::new(BackboneName::SyntheticTiny, false)
    }

    pub fn layer_count(&self) -> Option<usize> {
        self.name.info().layer_count
    }
}

/// Classification head: GAP, batch norm, dropout, a ReLU dense layer with
/// an L2 penalty, then the output layer.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HeadConfig {
    pub dropout_rate: f64,
    pub dense_units: usize,
    pub l2_strength: f64,
    pub num_classes: usize,
}

impl Default for HeadConfig {
    fn default() -> Self {
        Self {
            dropout_rate: 0.3,
            dense_units: 128,
            l2_strength: 1e-4,
            num_classes: 2,
        }
    }
}

impl HeadConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dropout_rate > 0.0 && self.dropout_rate < 1.0) {
            return Err(Error::range("dropout_rate", self.dropout_rate, "(0, 1)"));
        }
        if self.dense_units == 0 {
            return Err(Error::config("dense_units must be at least 1"));
        }
        if !(self.l2_strength >= 0.0) {
            return Err(Error::range("l2_strength", self.l2_strength, "[0, inf)"));
        }
        if self.num_classes < 2 {
            return Err(Error::config(format!(
                "num_classes must be at least 2, got {}",
                self.num_classes
            )));
        }
        Ok(())
    }

    /// One sigmoid unit for two classes, otherwise one softmax unit per class.
    pub fn output_units(&self) -> usize {
        if self.num_classes == 2 {
            1
        } else {
            self.num_classes
        }
    }

    pub fn is_binary(&self) -> bool {
        self.num_classes == 2
    }
}

/// Everything needed to rebuild a model from scratch.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub backbone: BackboneSpec,
    pub head: HeadConfig,
    pub freeze_rate: f64,
    /// `(height, width)`
    pub input_size: [usize; 2],
    pub seed: u64,
    /// Moving-statistics momentum of every batch-norm layer.
    #[serde(default = "default_bn_momentum")]
    pub bn_momentum: f64,
}

pub const DEFAULT_BN_MOMENTUM: f64 = 0.99;

fn default_bn_momentum() -> f64 {
    DEFAULT_BN_MOMENTUM
}

/// A built network plus the spec it came from.
#[derive(Clone, Debug)]
pub struct Model {
    pub network: Network,
    pub spec: ModelSpec,
    backbone_layers: usize,
    frozen: usize,
}

/// Assembles backbone and head and freezes the first
/// `num_freeze_layers(layer_count, freeze_rate)` weight-bearing backbone
/// layers.
pub fn build_model(spec: &ModelSpec) -> Result<Model> {
    spec.head.validate()?;
    if !(spec.bn_momentum > 0.0 && spec.bn_momentum < 1.0) {
        return Err(Error::range("bn_momentum", spec.bn_momentum, "(0, 1)"));
    }
    let layer_count = match spec.backbone.name {
        BackboneName::SyntheticTiny => tiny::WEIGHT_LAYERS,
        other => return Err(Error::WeightsUnavailable(other.to_string())),
    };
    let frozen = num_freeze_layers(layer_count, spec.freeze_rate)?;
    let [h, w] = spec.input_size;
    if h < tiny::MIN_INPUT || w < tiny::MIN_INPUT {
        return Err(Error::config(format!(
            "input size {h}x{w} is below the {0}x{0} minimum",
            tiny::MIN_INPUT
        )));
    }
    let mut r = rng::keyed(spec.seed, &[rng::derive(0, "init")]);
    let mut net = Network::new([3, h, w]);
    let features = tiny::push_backbone(&mut net, &mut r);
    let backbone_layers = net.layers().len();

    let head = &spec.head;
    net.push("gap", Layer::global_avg_pool());
    net.push("head_bn", Layer::BatchNorm(crate::nn::BatchNorm::new(features)));
    net.push(
        "head_dropout",
        Layer::Dropout(crate::nn::Dropout::new(
            head.dropout_rate,
            rng::derive(spec.seed, "dropout"),
        )),
    );
    let mut dense = crate::nn::Dense::he_normal(features, head.dense_units, &mut r);
    dense.weight.l2 = head.l2_strength;
    net.push("head_dense", Layer::Dense(dense));
    net.push("head_relu", Layer::relu());
    net.push(
        "predictions",
        Layer::Dense(crate::nn::Dense::glorot_uniform(
            head.dense_units,
            head.output_units(),
            &mut r,
        )),
    );

    for l in net.layers_mut() {
        if let Layer::BatchNorm(bn) = &mut l.layer {
            bn.momentum = spec.bn_momentum;
        }
    }
    let mut seen = 0;
    for l in net.layers_mut()[..backbone_layers].iter_mut() {
        if l.layer.has_params() {
            l.trainable = seen >= frozen;
            seen += 1;
        } else {
            l.trainable = seen >= frozen;
        }
    }
    Ok(Model {
        network: net,
        spec: spec.clone(),
        backbone_layers,
        frozen,
    })
}

impl Model {
    pub fn num_outputs(&self) -> usize {
        self.spec.head.output_units()
    }

    pub fn frozen_layers(&self) -> usize {
        self.frozen
    }

    pub fn backbone_layer_range(&self) -> std::ops::Range<usize> {
        0..self.backbone_layers
    }

    /// Index of the last layer whose output still has spatial extent.
    pub fn last_spatial_layer(&self) -> usize {
        let shapes = self.network.shapes();
        (0..self.backbone_layers)
            .rev()
            .find(|&i| shapes[i][2] * shapes[i][3] > 1)
            .unwrap_or(0)
    }

    pub fn logits(&mut self, x: &Tensor, mode: Mode) -> Result<Tensor> {
        self.network.forward(x, mode)
    }

    /// Class probabilities in inference mode. Binary models return one
    /// column holding the positive-class probability.
    pub fn predict(&mut self, x: &Tensor) -> Result<Vec<Vec<f64>>> {
        let logits = self.network.forward(x, Mode::Infer)?;
        Ok(activate(&logits))
    }

    /// Reseeds the dropout stream, e.g. once per epoch.
    pub fn reseed_dropout(&mut self, seed: u64) {
        for l in self.network.layers_mut() {
            if let Layer::Dropout(d) = &mut l.layer {
                d.reseed(seed);
            }
        }
    }
}

/// Sigmoid for single-unit rows, softmax otherwise.
pub fn activate(logits: &Tensor) -> Vec<Vec<f64>> {
    let k = logits.sample_len();
    logits
        .data()
        .chunks(k)
        .map(|row| if k == 1 { vec![sigmoid(row[0])] } else { softmax(row) })
        .collect()
}

pub(crate) fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

pub(crate) fn softmax(row: &[f64]) -> Vec<f64> {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = row.iter().map(|z| (z - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn tiny_spec(num_classes: usize, freeze_rate: f64) -> ModelSpec {
        ModelSpec {
            backbone: BackboneSpec::synthetic_tiny(),
            head: HeadConfig {
                num_classes,
                dense_units: 16,
                ..HeadConfig::default()
            },
            freeze_rate,
            input_size: [16, 16],
            seed: 3,
            bn_momentum: DEFAULT_BN_MOMENTUM,
        }
    }

    fn batch(n: usize) -> Tensor {
        let data = (0..n * 3 * 16 * 16).map(|i| ((i * 37) % 101) as f64 / 101.0).collect();
        Tensor::from_vec([n, 3, 16, 16], data).unwrap()
    }

    #[test]
    fn binary_head_has_one_sigmoid_output() {
        let mut m = build_model(&tiny_spec(2, 0.0)).unwrap();
        let p = m.predict(&batch(5)).unwrap();
        assert_eq!((p.len(), p[0].len()), (5, 1));
        assert!(p.iter().all(|r| r[0] > 0.0 && r[0] < 1.0));
    }

    #[test]
    fn softmax_rows_sum_to_one() {
        let mut m = build_model(&tiny_spec(3, 0.0)).unwrap();
        for row in m.predict(&batch(4)).unwrap() {
            assert_eq!(row.len(), 3);
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn full_freeze_leaves_only_head() {
        let m = build_model(&tiny_spec(2, 1.0)).unwrap();
        let range = m.backbone_layer_range();
        assert!(m.network.layers()[range.clone()]
            .iter()
            .all(|l| !l.trainable || !l.layer.has_params()));
        let head: usize = m.network.layers()[range.end..]
            .iter()
            .map(|l| l.layer.param_count())
            .sum();
        assert_eq!(m.network.trainable_param_count(), head);
    }

    #[test]
    fn trainable_count_strictly_decreases_per_layer() {
        let mut last = usize::MAX;
        for k in 0..=tiny::WEIGHT_LAYERS {
            let rate = k as f64 / tiny::WEIGHT_LAYERS as f64;
            let m = build_model(&tiny_spec(2, rate)).unwrap();
            assert_eq!(m.frozen_layers(), k);
            let n = m.network.trainable_param_count();
            assert!(n < last, "rate {rate}: {n} !< {last}");
            last = n;
        }
    }

    #[test]
    fn pretrained_backbones_are_unavailable_offline() {
        let mut spec = tiny_spec(2, 0.0);
        spec.backbone = BackboneSpec::new(BackboneName::DenseNet121, true);
        let err = build_model(&spec).unwrap_err();
        assert!(matches!(err, Error::WeightsUnavailable(_)));
        assert!(err.to_string().contains("SyntheticTiny"));
    }

    #[test]
    fn invalid_head_rejected() {
        let mut spec = tiny_spec(2, 0.0);
        spec.head.dropout_rate = 1.0;
        assert!(build_model(&spec).is_err());
        spec = tiny_spec(1, 0.0);
        assert!(build_model(&spec).is_err());
    }

    #[test]
    fn same_seed_same_weights() {
        let a = build_model(&tiny_spec(2, 0.0)).unwrap();
        let b = build_model(&tiny_spec(2, 0.0)).unwrap();
        assert_eq!(a.network.state(), b.network.state());
    }

    #[test]
    fn last_spatial_layer_is_final_block() {
        let m = build_model(&tiny_spec(2, 0.0)).unwrap();
        let i = m.last_spatial_layer();
        assert_eq!(m.network.layers()[i].name, "block4_relu");
    }
}
