use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Backbones known to the registry.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum BackboneName {
    VGG16,
    ResNet50,
    DenseNet121,
    MobileNet,
    MobileNetV2,
    NASNetMobile,
    EfficientNetB0,
    EfficientNetV2B0,
    ConvNeXtTiny,
    SyntheticTiny,
}

/// Static facts about a backbone. `layer_count` is `None` where no count is
/// published.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BackboneInfo {
    pub name: BackboneName,
    pub family: &'static str,
    pub year: u16,
    pub top1_imagenet: Option<f64>,
    pub params_millions: Option<f64>,
    pub layer_count: Option<usize>,
    pub offline: bool,
}

const fn info(
    name: BackboneName,
    family: &'static str,
    year: u16,
    top1: Option<f64>,
    params: Option<f64>,
    layers: Option<usize>,
) -> BackboneInfo {
    BackboneInfo {
        name,
        family,
        year,
        top1_imagenet: top1,
        params_millions: params,
        layer_count: layers,
        offline: false,
    }
}

/// The nine pretrained backbones of the benchmark followed by the offline
/// stand-in.
pub static REGISTRY: [BackboneInfo; 10] = [
    info(BackboneName::VGG16, "VGG", 2014, Some(71.3), Some(138.0), Some(41)),
    info(
        BackboneName::ResNet50,
        "ResNet",
        2015,
        Some(76.2),
        Some(25.6),
        Some(177),
    ),
    info(
        BackboneName::DenseNet121,
        "DenseNet",
        2017,
        Some(74.9),
        Some(8.0),
        Some(121),
    ),
    info(BackboneName::MobileNet, "MobileNet", 2017, None, None, None),
    info(
        BackboneName::MobileNetV2,
        "MobileNet",
        2018,
        Some(71.8),
        Some(3.4),
        Some(88),
    ),
    info(
        BackboneName::NASNetMobile,
        "NASNet",
        2018,
        Some(74.0),
        Some(5.3),
        Some(88),
    ),
    info(
        BackboneName::EfficientNetB0,
        "EfficientNet",
        2019,
        Some(77.1),
        Some(5.3),
        Some(237),
    ),
    info(
        BackboneName::EfficientNetV2B0,
        "EfficientNet",
        2021,
        Some(78.1),
        Some(7.1),
        Some(329),
    ),
    info(
        BackboneName::ConvNeXtTiny,
        "ConvNeXt",
        2022,
        Some(82.1),
        Some(28.0),
        Some(59),
    ),
    BackboneInfo {
        name: BackboneName::SyntheticTiny,
        family: "synthetic",
        year: 0,
        top1_imagenet: None,
        params_millions: Some(0.045),
        layer_count: Some(super::tiny::WEIGHT_LAYERS),
        offline: true,
    },
];

impl BackboneName {
    pub const ALL: [BackboneName; 10] = [
        BackboneName::VGG16,
        BackboneName::ResNet50,
        BackboneName::DenseNet121,
        BackboneName::MobileNet,
        BackboneName::MobileNetV2,
        BackboneName::NASNetMobile,
        BackboneName::EfficientNetB0,
        BackboneName::EfficientNetV2B0,
        BackboneName::ConvNeXtTiny,
        BackboneName::SyntheticTiny,
    ];

    pub fn info(self) -> &'static BackboneInfo {
        REGISTRY
            .iter()
            .find(|i| i.name == self)
            .expect("registry covers every name")
    }

    pub fn as_str(self) -> &'static str {
        match self {
            BackboneName::VGG16 => "VGG16",
            BackboneName::ResNet50 => "ResNet50",
            BackboneName::DenseNet121 => "DenseNet121",
            BackboneName::MobileNet => "MobileNet",
            BackboneName::MobileNetV2 => "MobileNetV2",
            BackboneName::NASNetMobile => "NASNetMobile",
            BackboneName::EfficientNetB0 => "EfficientNetB0",
            BackboneName::EfficientNetV2B0 => "EfficientNetV2B0",
            BackboneName::ConvNeXtTiny => "ConvNeXtTiny",
            BackboneName::SyntheticTiny => "SyntheticTiny",
        }
    }
}

impl fmt::Display for BackboneName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for BackboneName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        BackboneName::ALL
            .into_iter()
            .find(|n| n.as_str().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::Registry {
                kind: "backbone",
                name: s.to_string(),
            })
    }
}

/// `floor(layer_count * freeze_rate)`.
pub fn num_freeze_layers(layer_count: usize, freeze_rate: f64) -> Result<usize> {
    if !(0.0..=1.0).contains(&freeze_rate) {
        return Err(Error::range("freeze_rate", freeze_rate, "[0, 1]"));
    }
    Ok(((layer_count as f64 * freeze_rate).floor() as usize).min(layer_count))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn freeze_examples() {
        assert_eq!(num_freeze_layers(100, 0.20).unwrap(), 20);
        assert_eq!(num_freeze_layers(41, 0.50).unwrap(), 20);
        assert_eq!(num_freeze_layers(77, 0.0).unwrap(), 0);
        assert_eq!(num_freeze_layers(77, 1.0).unwrap(), 77);
        assert!(matches!(num_freeze_layers(10, 1.5), Err(Error::Range { .. })));
        assert!(num_freeze_layers(10, -0.1).is_err());
    }

    #[test]
    fn names_round_trip() {
        for n in BackboneName::ALL {
            assert_eq!(n.to_string().parse::<BackboneName>().unwrap(), n);
            assert_eq!(n.info().name, n);
        }
        assert_eq!(
            "densenet121".parse::<BackboneName>().unwrap(),
            BackboneName::DenseNet121
        );
        assert!(matches!(
            "Xception".parse::<BackboneName>(),
            Err(Error::Registry { .. })
        ));
    }

    #[test]
    fn vgg_reports_41_layers() {
        assert_eq!(BackboneName::VGG16.info().layer_count, Some(41));
        assert!(BackboneName::SyntheticTiny.info().offline);
    }

    proptest! {
        #[test]
        fn monotone_in_rate(n in 0usize..500, a in 0.0f64..=1.0, b in 0.0f64..=1.0) {
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            let (fl, fh) = (num_freeze_layers(n, lo).unwrap(), num_freeze_layers(n, hi).unwrap());
            prop_assert!(fl <= fh && fh <= n);
        }
    }
}
