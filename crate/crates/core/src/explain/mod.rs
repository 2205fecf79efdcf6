//! Grad-CAM heatmaps and overlays.

use std::path::Path;

use image::{Rgb, RgbImage};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::modelzoo::Model;
use crate::nn::{Mode, Tensor};
use crate::pipeline::{stack, ImageTensor};

/// Which output score to explain.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CamTarget {
    /// The pre-sigmoid logit of a binary model, or the top class otherwise.
    Predicted,
    /// Pre-softmax score of one class.
    Class(usize),
}

/// Values in `[0, 1]`, row-major, at the input resolution.
#[derive(Clone, Debug, PartialEq)]
pub struct Heatmap {
    pub height: usize,
    pub width: usize,
    pub values: Vec<f64>,
    /// The target's gradient w.r.t. the feature map was identically zero.
    pub zero_gradient: bool,
}

impl Heatmap {
    pub fn get(&self, y: usize, x: usize) -> f64 {
        self.values[y * self.width + x]
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|&v| v == 0.0)
    }
}

/// Resolves a layer name, or picks the last spatial backbone layer.
pub fn resolve_layer(model: &Model, layer: Option<&str>) -> Result<usize> {
    let Some(name) = layer else {
        return Ok(model.last_spatial_layer());
    };
    let idx = model
        .network
        .index_of(name)
        .ok_or_else(|| Error::LayerSelection(format!("no layer named `{name}`")))?;
    let shape = model.network.shapes()[idx];
    if shape[2] * shape[3] <= 1 {
        return Err(Error::LayerSelection(format!(
            "layer `{name}` has output {:?}, which has no spatial extent",
            &shape[1..]
        )));
    }
    Ok(idx)
}

/// Grad-CAM: channel weights are the spatial mean of the target score's
/// gradient; the weighted channel sum is rectified, bilinearly upsampled to
/// the input size and divided by its maximum.
pub fn grad_cam(model: &mut Model, image: &ImageTensor, target: CamTarget, layer: Option<&str>) -> Result<Heatmap> {
    let idx = resolve_layer(model, layer)?;
    let x = stack(&[image])?;
    let (logits, feat) = model.network.forward_capture(&x, Mode::Infer, Some(idx))?;
    let feat = feat.expect("captured layer");
    let k = logits.sample_len();
    let class = match target {
        CamTarget::Predicted if k == 1 => 0,
        CamTarget::Predicted => {
            let row = logits.data();
            (0..k).fold(0, |b, j| if row[j] > row[b] { j } else { b })
        }
        CamTarget::Class(c) if k == 1 && c <= 1 => 0,
        CamTarget::Class(c) if c < k => c,
        CamTarget::Class(c) => return Err(Error::range("target class", c as f64, format!("[0, {k})"))),
    };
    let mut seed = vec![0.0; k];
    seed[class] = 1.0;
    let grad = model.network.gradient_at(&Tensor::from_vec([1, k, 1, 1], seed)?, idx);
    let [_, c, fh, fw] = feat.shape();
    let plane = fh * fw;
    let (h, w) = (image.height(), image.width());
    if grad.data().iter().all(|&g| g == 0.0) {
        return Ok(Heatmap {
            height: h,
            width: w,
            values: vec![0.0; h * w],
            zero_gradient: true,
        });
    }
    let mut cam = vec![0.0; plane];
    for ch in 0..c {
        let g = &grad.data()[ch * plane..(ch + 1) * plane];
        let a = &feat.data()[ch * plane..(ch + 1) * plane];
        let weight = g.iter().sum::<f64>() / plane as f64;
        for (out, v) in cam.iter_mut().zip(a) {
            *out += weight * v;
        }
    }
    cam.iter_mut().for_each(|v| *v = v.max(0.0));
    let mut values = upsample_bilinear(&cam, fh, fw, h, w);
    let max = values.iter().copied().fold(0.0, f64::max);
    if max > 0.0 {
        values.iter_mut().for_each(|v| *v = (*v / max).clamp(0.0, 1.0));
    } else {
        values.iter_mut().for_each(|v| *v = 0.0);
    }
    Ok(Heatmap {
        height: h,
        width: w,
        values,
        zero_gradient: false,
    })
}

/// Half-pixel-centred bilinear resize with edge clamping.
pub fn upsample_bilinear(src: &[f64], sh: usize, sw: usize, dh: usize, dw: usize) -> Vec<f64> {
    let coord = |d: usize, s: usize, n: usize| {
        let x = ((d as f64 + 0.5) * s as f64 / n as f64 - 0.5).clamp(0.0, (s - 1) as f64);
        let i0 = x.floor() as usize;
        (i0, (i0 + 1).min(s - 1), x - i0 as f64)
    };
    let mut out = Vec::with_capacity(dh * dw);
    for y in 0..dh {
        let (y0, y1, fy) = coord(y, sh, dh);
        for x in 0..dw {
            let (x0, x1, fx) = coord(x, sw, dw);
            let at = |yy: usize, xx: usize| src[yy * sw + xx];
            let top = at(y0, x0) + (at(y0, x1) - at(y0, x0)) * fx;
            let bottom = at(y1, x0) + (at(y1, x1) - at(y1, x0)) * fx;
            out.push(top + (bottom - top) * fy);
        }
    }
    out
}

/// Jet colormap for a value in `[0, 1]`.
pub fn jet(v: f64) -> [f64; 3] {
    let v = v.clamp(0.0, 1.0);
    let f = |c: f64| (1.5 - (4.0 * v - c).abs()).clamp(0.0, 1.0);
    [f(3.0), f(2.0), f(1.0)]
}

fn to_u8(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

/// Blends the jet-coloured heatmap over the image: `(1 - alpha) * image +
/// alpha * jet(heatmap)`.
pub fn overlay(image: &ImageTensor, heatmap: &Heatmap, alpha: f64) -> Result<RgbImage> {
    if (image.height(), image.width()) != (heatmap.height, heatmap.width) {
        return Err(Error::shape(format!(
            "image is {}x{} but heatmap is {}x{}",
            image.height(),
            image.width(),
            heatmap.height,
            heatmap.width
        )));
    }
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::range("alpha", alpha, "[0, 1]"));
    }
    Ok(RgbImage::from_fn(
        image.width() as u32,
        image.height() as u32,
        |x, y| {
            let (x, y) = (x as usize, y as usize);
            let color = jet(heatmap.get(y, x));
            let px = |c: usize| {
                let base = f64::from(to_u8(f64::from(image.get(c, y, x))));
                if alpha == 0.0 {
                    base as u8
                } else {
                    to_u8(((1.0 - alpha) * base / 255.0) + alpha * color[c])
                }
            };
            Rgb([px(0), px(1), px(2)])
        },
    ))
}

/// The heatmap alone through the jet colormap.
pub fn heatmap_image(heatmap: &Heatmap) -> RgbImage {
    RgbImage::from_fn(heatmap.width as u32, heatmap.height as u32, |x, y| {
        let c = jet(heatmap.get(y as usize, x as usize));
        Rgb([to_u8(c[0]), to_u8(c[1]), to_u8(c[2])])
    })
}

pub fn save_rgb(img: &RgbImage, path: &Path) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    img.save(path)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::modelzoo::{build_model, BackboneSpec, HeadConfig, ModelSpec, DEFAULT_BN_MOMENTUM};
    use crate::nn::Layer;

    fn model(classes: usize) -> Model {
        build_model(&ModelSpec {
            backbone: BackboneSpec::synthetic_tiny(),
            head: HeadConfig {
                num_classes: classes,
                dense_units: 8,
                ..HeadConfig::default()
            },
            freeze_rate: 0.0,
            input_size: [16, 16],
            seed: 5,
            bn_momentum: DEFAULT_BN_MOMENTUM,
        })
        .unwrap()
    }

    fn image() -> ImageTensor {
        let g: Vec<f32> = (0..256).map(|i| ((i * 13) % 17) as f32 / 17.0).collect();
        ImageTensor::from_gray(16, 16, &g).unwrap()
    }

    fn find_nonzero(classes: usize) -> (Model, Heatmap) {
        for seed in 0..20 {
            let mut m = model(classes);
            m.spec.seed = seed;
            let mut m = build_model(&m.spec).unwrap();
            let h = grad_cam(&mut m, &image(), CamTarget::Predicted, None).unwrap();
            if !h.is_zero() {
                return (m, h);
            }
        }
        panic!("no seed gave a nonzero map");
    }

    #[test]
    fn constant_output_gives_flagged_zero_map() {
        let mut m = model(2);
        let last = m.network.layers().len() - 1;
        if let Layer::Dense(d) = &mut m.network.layers_mut()[last].layer {
            d.weight.value.iter_mut().for_each(|w| *w = 0.0);
        }
        let h = grad_cam(&mut m, &image(), CamTarget::Predicted, None).unwrap();
        assert!(h.zero_gradient && h.is_zero());
        assert_eq!((h.height, h.width), (16, 16));
    }

    #[test]
    fn nonzero_maps_are_normalized_and_rectified() {
        for classes in [2, 3] {
            let (_, h) = find_nonzero(classes);
            assert_eq!(h.max(), 1.0);
            assert!(h.values.iter().all(|&v| (0.0..=1.0).contains(&v)));
            assert_eq!(h.values.len(), 256);
        }
    }

    #[test]
    fn positive_scaling_of_target_leaves_map_unchanged() {
        let (mut m, h) = find_nonzero(2);
        let last = m.network.layers().len() - 1;
        if let Layer::Dense(d) = &mut m.network.layers_mut()[last].layer {
            d.weight.value.iter_mut().for_each(|w| *w *= 3.5);
            d.bias.value.iter_mut().for_each(|b| *b *= 3.5);
        }
        let scaled = grad_cam(&mut m, &image(), CamTarget::Predicted, None).unwrap();
        for (a, b) in h.values.iter().zip(&scaled.values) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn non_spatial_layer_rejected() {
        let m = model(2);
        assert!(matches!(
            resolve_layer(&m, Some("head_dense")),
            Err(Error::LayerSelection(_))
        ));
        assert!(matches!(resolve_layer(&m, Some("nope")), Err(Error::LayerSelection(_))));
        assert_eq!(resolve_layer(&m, Some("block2_conv")).unwrap(), 4);
    }

    #[test]
    fn overlay_extremes() {
        let img = image();
        let (_, h) = find_nonzero(2);
        let zero = overlay(&img, &h, 0.0).unwrap();
        for (x, y, p) in zero.enumerate_pixels() {
            let v = (img.get(0, y as usize, x as usize) * 255.0).round() as u8;
            assert_eq!(p.0, [v, v, v]);
        }
        assert_eq!(overlay(&img, &h, 1.0).unwrap(), heatmap_image(&h));
        let small = Heatmap {
            height: 2,
            width: 2,
            values: vec![0.0; 4],
            zero_gradient: false,
        };
        assert!(matches!(overlay(&img, &small, 0.5), Err(Error::Shape(_))));
    }

    #[test]
    fn jet_endpoints() {
        assert_eq!(jet(0.0), [0.0, 0.0, 0.5]);
        assert_eq!(jet(0.5), [0.5, 1.0, 0.5]);
        assert_eq!(jet(1.0), [0.5, 0.0, 0.0]);
    }

    #[test]
    fn upsample_constant_and_identity() {
        assert_eq!(upsample_bilinear(&[2.0; 4], 2, 2, 5, 7), vec![2.0; 35]);
        let src: Vec<f64> = (0..6).map(f64::from).collect();
        assert_eq!(upsample_bilinear(&src, 2, 3, 2, 3), src);
    }
}
