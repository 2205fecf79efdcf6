use rand::Rng;
use serde::{Deserialize, Serialize};

use super::image::ImageTensor;
use crate::error::{Error, Result};
use crate::rng;

/// Random transform ranges. Every magnitude `m` is sampled uniformly from
/// `[-m, m]`; rotation is in degrees and the others are fractions of the
/// image size (zoom, translation) or of the original contrast.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AugmentationPolicy {
    pub horizontal_flip: bool,
    pub rotation_degrees: f64,
    pub zoom_fraction: f64,
    pub contrast_fraction: f64,
    pub translation_fraction: f64,
    pub seed: u64,
}

impl Default for AugmentationPolicy {
    fn default() -> Self {
        Self {
            horizontal_flip: true,
            rotation_degrees: 15.0,
            zoom_fraction: 0.10,
            contrast_fraction: 0.10,
            translation_fraction: 0.05,
            seed: rng::DEFAULT_SEED,
        }
    }
}

impl AugmentationPolicy {
    pub fn identity() -> Self {
        Self {
            horizontal_flip: false,
            rotation_degrees: 0.0,
            zoom_fraction: 0.0,
            contrast_fraction: 0.0,
            translation_fraction: 0.0,
            seed: rng::DEFAULT_SEED,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let checks = [
            ("rotation_degrees", self.rotation_degrees, 180.0),
            ("zoom_fraction", self.zoom_fraction, 0.95),
            ("contrast_fraction", self.contrast_fraction, 1.0),
            ("translation_fraction", self.translation_fraction, 1.0),
        ];
        for (name, value, max) in checks {
            if !(0.0..=max).contains(&value) {
                return Err(Error::range(name, value, format!("[0, {max}]")));
            }
        }
        Ok(())
    }

    /// Transform parameters for one (image, draw) pair. The stream is keyed by
    /// `(seed, image_index, draw)`, so results do not depend on execution order.
    pub fn sample(&self, image_index: u64, draw: u64) -> AugmentParams {
        let mut r = rng::keyed(self.seed, &[image_index, draw]);
        let mut sym = |m: f64| if m > 0.0 { r.random_range(-m..=m) } else { 0.0 };
        let rotation_degrees = sym(self.rotation_degrees);
        let zoom = sym(self.zoom_fraction);
        let contrast = sym(self.contrast_fraction);
        let shift_x = sym(self.translation_fraction);
        let shift_y = sym(self.translation_fraction);
        let flip = self.horizontal_flip && r.random_bool(0.5);
        AugmentParams {
            flip,
            rotation_degrees,
            zoom,
            contrast_factor: 1.0 + contrast,
            shift_x,
            shift_y,
        }
    }
}

/// One concrete draw of transform parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct AugmentParams {
    pub flip: bool,
    pub rotation_degrees: f64,
    /// Positive values magnify, negative values shrink.
    pub zoom: f64,
    pub contrast_factor: f64,
    /// Fractions of width and height.
    pub shift_x: f64,
    pub shift_y: f64,
}

impl AugmentParams {
    pub fn identity() -> Self {
        Self {
            flip: false,
            rotation_degrees: 0.0,
            zoom: 0.0,
            contrast_factor: 1.0,
            shift_x: 0.0,
            shift_y: 0.0,
        }
    }

    fn is_geometric_identity(&self) -> bool {
        !self.flip && self.rotation_degrees == 0.0 && self.zoom == 0.0 && self.shift_x == 0.0 && self.shift_y == 0.0
    }
}

/// Samples parameters with [`AugmentationPolicy::sample`] and applies them.
pub fn apply_augmentation(
    image: &ImageTensor,
    policy: &AugmentationPolicy,
    image_index: u64,
    draw: u64,
) -> ImageTensor {
    apply_params(image, &policy.sample(image_index, draw))
}

/// Applies flip, rotation, zoom and translation through an inverse affine
/// map with bilinear sampling and nearest-edge fill, then adjusts contrast
/// around each channel's mean and clamps to `[0, 1]`.
pub fn apply_params(image: &ImageTensor, p: &AugmentParams) -> ImageTensor {
    let (h, w) = (image.height(), image.width());
    let n = h * w;
    let mut out = if p.is_geometric_identity() {
        image.data().to_vec()
    } else {
        let (cy, cx) = ((h as f64 - 1.0) / 2.0, (w as f64 - 1.0) / 2.0);
        let theta = p.rotation_degrees.to_radians();
        let (sin, cos) = theta.sin_cos();
        let scale = 1.0 + p.zoom;
        let (tx, ty) = (p.shift_x * w as f64, p.shift_y * h as f64);
        let mut coords = Vec::with_capacity(n);
        for y in 0..h {
            for x in 0..w {
                let dx = x as f64 - tx - cx;
                let dy = y as f64 - ty - cy;
                let sx = cx + (cos * dx + sin * dy) / scale;
                let sy = cy + (-sin * dx + cos * dy) / scale;
                let sx = if p.flip { (w as f64 - 1.0) - sx } else { sx };
                coords.push((sy, sx));
            }
        }
        let mut data = Vec::with_capacity(3 * n);
        for c in 0..3 {
            let plane = image.plane(c);
            data.extend(coords.iter().map(|&(sy, sx)| bilinear(plane, h, w, sy, sx)));
        }
        data
    };
    if p.contrast_factor != 1.0 {
        let f = p.contrast_factor as f32;
        for plane in out.chunks_mut(n) {
            let mean = plane.iter().map(|&v| f64::from(v)).sum::<f64>() as f32 / n as f32;
            for v in plane.iter_mut() {
                *v = (*v - mean) * f + mean;
            }
        }
    }
    for v in &mut out {
        *v = v.clamp(0.0, 1.0);
    }
    ImageTensor::from_chw(h, w, out).expect("shape preserved")
}

fn bilinear(plane: &[f32], h: usize, w: usize, y: f64, x: f64) -> f32 {
    let y = y.clamp(0.0, (h - 1) as f64);
    let x = x.clamp(0.0, (w - 1) as f64);
    let (y0, x0) = (y.floor() as usize, x.floor() as usize);
    let (y1, x1) = ((y0 + 1).min(h - 1), (x0 + 1).min(w - 1));
    let (fy, fx) = ((y - y0 as f64) as f32, (x - x0 as f64) as f32);
    let at = |yy: usize, xx: usize| plane[yy * w + xx];
    let top = at(y0, x0) + (at(y0, x1) - at(y0, x0)) * fx;
    let bottom = at(y1, x0) + (at(y1, x1) - at(y1, x0)) * fx;
    top + (bottom - top) * fy
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn fixture() -> ImageTensor {
        let g: Vec<f32> = (0..9).map(|i| i as f32 / 10.0).collect();
        ImageTensor::from_gray(3, 3, &g).unwrap()
    }

    #[test]
    fn identity_policy_is_exact() {
        let img = fixture();
        for draw in 0..5 {
            assert_eq!(apply_augmentation(&img, &AugmentationPolicy::identity(), 3, draw), img);
        }
    }

    #[test]
    fn flip_mirrors_columns() {
        let img = fixture();
        let p = AugmentParams {
            flip: true,
            ..AugmentParams::identity()
        };
        let out = apply_params(&img, &p);
        for c in 0..3 {
            for y in 0..3 {
                for x in 0..3 {
                    assert_eq!(out.get(c, y, x), img.get(c, y, 2 - x));
                }
            }
        }
    }

    #[test]
    fn flip_only_policy_gives_identity_or_mirror() {
        let img = fixture();
        let policy = AugmentationPolicy {
            horizontal_flip: true,
            ..AugmentationPolicy::identity()
        };
        let mirrored = apply_params(
            &img,
            &AugmentParams {
                flip: true,
                ..AugmentParams::identity()
            },
        );
        let mut seen = [false; 2];
        for draw in 0..32 {
            let out = apply_augmentation(&img, &policy, 0, draw);
            if out == img {
                seen[0] = true;
            } else {
                assert_eq!(out, mirrored);
                seen[1] = true;
            }
        }
        assert_eq!(seen, [true, true]);
    }

    #[test]
    fn rotating_constant_image_is_constant() {
        let img = ImageTensor::constant(17, 13, 0.4);
        let p = AugmentParams {
            rotation_degrees: 15.0,
            ..AugmentParams::identity()
        };
        assert_eq!(apply_params(&img, &p), img);
    }

    #[test]
    fn draws_are_deterministic_and_distinct() {
        let policy = AugmentationPolicy::default();
        assert_eq!(policy.sample(4, 1), policy.sample(4, 1));
        assert_ne!(policy.sample(4, 1), policy.sample(4, 2));
        assert_ne!(policy.sample(4, 1), policy.sample(5, 1));
    }

    #[test]
    fn negative_magnitude_rejected() {
        let policy = AugmentationPolicy {
            zoom_fraction: -0.1,
            ..AugmentationPolicy::default()
        };
        assert!(policy.validate().is_err());
    }

    proptest! {
        #[test]
        fn preserves_shape_and_range(
            rot in 0.0f64..45.0, zoom in 0.0f64..0.5, contrast in 0.0f64..1.0,
            shift in 0.0f64..0.3, flip: bool, seed: u64, draw in 0u64..100,
            h in 2usize..12, w in 2usize..12, pixels in proptest::collection::vec(0.0f32..=1.0, 144),
        ) {
            let img = ImageTensor::from_gray(h, w, &pixels[..h * w]).unwrap();
            let policy = AugmentationPolicy {
                horizontal_flip: flip, rotation_degrees: rot, zoom_fraction: zoom,
                contrast_fraction: contrast, translation_fraction: shift, seed,
            };
            let p = policy.sample(7, draw);
            prop_assert!(p.rotation_degrees.abs() <= rot && p.zoom.abs() <= zoom);
            prop_assert!((p.contrast_factor - 1.0).abs() <= contrast + 1e-12);
            prop_assert!(p.shift_x.abs() <= shift && p.shift_y.abs() <= shift);
            let out = apply_params(&img, &p);
            prop_assert_eq!((out.height(), out.width()), (h, w));
            prop_assert!(out.data().iter().all(|v| (0.0..=1.0).contains(v)));
        }
    }
}
