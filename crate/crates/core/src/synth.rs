//! Two-class synthetic image corpus: a bright ellipse on noise versus noise
//! alone, with manifest metadata and ground-truth geometry.

use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data_model::{write_manifest, DatasetManifest, Label, Modality, PatientRecord, Sex};
use crate::error::{Error, Result};
use crate::pipeline::ImageTensor;
use crate::rng;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub count: usize,
    pub image_size: usize,
    /// Share of ellipse (covid-labelled) images; the count is
    /// `floor(count * positive_fraction)`.
    pub positive_fraction: f64,
    /// `(country, weight)` pairs.
    pub countries: Vec<(String, f64)>,
    pub age_mean: f64,
    pub age_sd: f64,
    pub female_fraction: f64,
    pub missing_age_rate: f64,
    pub missing_sex_rate: f64,
    /// Ellipse brightness above the background.
    pub contrast: f64,
    /// Semi-axis range as a fraction of the image side.
    pub radius_range: (f64, f64),
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        let countries = [
            ("Spain", 3.0),
            ("China", 3.0),
            ("USA", 2.0),
            ("France", 1.5),
            ("Russia", 1.0),
            ("Iran", 0.7),
        ];
        Self {
            count: 2000,
            image_size: 64,
            positive_fraction: 0.55,
            countries: countries.iter().map(|(c, w)| (c.to_string(), *w)).collect(),
            age_mean: 50.0,
            age_sd: 18.0,
            female_fraction: 0.5,
            missing_age_rate: 0.05,
            missing_sex_rate: 0.05,
            contrast: 0.35,
            radius_range: (0.12, 0.22),
            seed: rng::DEFAULT_SEED,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.count == 0 {
            return Err(Error::config("synth count must be at least 1"));
        }
        if self.image_size < 8 {
            return Err(Error::config("synth image_size must be at least 8"));
        }
        for (name, v) in [
            ("positive_fraction", self.positive_fraction),
            ("female_fraction", self.female_fraction),
            ("missing_age_rate", self.missing_age_rate),
            ("missing_sex_rate", self.missing_sex_rate),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::range(name, v, "[0, 1]"));
            }
        }
        if self.countries.is_empty() || self.countries.iter().any(|(_, w)| !(*w > 0.0)) {
            return Err(Error::config("synth countries need positive weights"));
        }
        let (lo, hi) = self.radius_range;
        if !(lo > 0.0 && lo <= hi && hi < 0.5) {
            return Err(Error::config("radius_range needs 0 < low <= high < 0.5"));
        }
        Ok(())
    }

    pub fn positives(&self) -> usize {
        (self.count as f64 * self.positive_fraction).floor() as usize
    }
}

/// Ellipse drawn into a positive image, in pixel units.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Geometry {
    pub image_ref: String,
    pub cx: f64,
    pub cy: f64,
    pub rx: f64,
    pub ry: f64,
    pub angle: f64,
}

impl Geometry {
    pub fn contains(&self, y: f64, x: f64) -> bool {
        let (s, c) = self.angle.sin_cos();
        let (dx, dy) = (x - self.cx, y - self.cy);
        let u = (c * dx + s * dy) / self.rx;
        let v = (-s * dx + c * dy) / self.ry;
        u * u + v * v <= 1.0
    }
}

#[derive(Clone, Debug)]
pub struct SynthCorpus {
    pub manifest: DatasetManifest,
    pub geometry: Vec<Geometry>,
    pub manifest_path: PathBuf,
    pub geometry_path: PathBuf,
}

/// `(cx, cy, rx, ry, angle)` in pixels and radians.
pub type Ellipse = (f64, f64, f64, f64, f64);

/// Renders one image. Returns the pixels and, for positives, the ellipse.
pub fn render(config: &SynthConfig, index: usize, positive: bool) -> (Vec<f32>, Option<Ellipse>) {
    let n = config.image_size;
    let mut r = rng::keyed(config.seed, &[rng::derive(0, "pixels"), index as u64]);
    let level: f64 = r.random_range(0.15..0.30);
    let shape = positive.then(|| {
        let side = n as f64;
        let (lo, hi) = config.radius_range;
        let rx = r.random_range(lo..=hi) * side;
        let ry = r.random_range(lo..=hi) * side;
        let margin = rx.max(ry) + 1.0;
        let cx = r.random_range(margin..=side - 1.0 - margin);
        let cy = r.random_range(margin..=side - 1.0 - margin);
        let angle = r.random_range(0.0..std::f64::consts::PI);
        (cx, cy, rx, ry, angle)
    });
    let mut px = Vec::with_capacity(n * n);
    for y in 0..n {
        for x in 0..n {
            let mut v = level + 0.35 * r.random::<f64>();
            if let Some((cx, cy, rx, ry, angle)) = shape {
                let (s, c) = f64::sin_cos(angle);
                let (dx, dy) = (x as f64 - cx, y as f64 - cy);
                let u = (c * dx + s * dy) / rx;
                let w = (-s * dx + c * dy) / ry;
                let d = (u * u + w * w).sqrt();
                let edge = (rx.min(ry)).recip();
                v += config.contrast * ((1.0 - d) / edge + 0.5).clamp(0.0, 1.0);
            }
            px.push(v.clamp(0.0, 1.0) as f32);
        }
    }
    (px, shape)
}

/// Writes `images/synth_NNNNN.png`, `manifest.csv` and `geometry.csv` under
/// `dir`. Output is a pure function of the config.
pub fn generate(config: &SynthConfig, dir: &Path) -> Result<SynthCorpus> {
    config.validate()?;
    let img_dir = dir.join("images");
    std::fs::create_dir_all(&img_dir)?;
    let mut labels: Vec<bool> = (0..config.count).map(|i| i < config.positives()).collect();
    labels.shuffle(&mut rng::keyed(config.seed, &[rng::derive(0, "labels")]));
    let total_weight: f64 = config.countries.iter().map(|(_, w)| w).sum();
    let mut records = Vec::with_capacity(config.count);
    let mut geometry = Vec::new();
    for (i, &positive) in labels.iter().enumerate() {
        let image_ref = format!("images/synth_{i:05}.png");
        let (px, shape) = render(config, i, positive);
        ImageTensor::from_gray(config.image_size, config.image_size, &px)?.save_png(dir.join(&image_ref))?;
        if let Some((cx, cy, rx, ry, angle)) = shape {
            geometry.push(Geometry {
                image_ref: image_ref.clone(),
                cx,
                cy,
                rx,
                ry,
                angle,
            });
        }
        let mut r = rng::keyed(config.seed, &[rng::derive(0, "meta"), i as u64]);
        let mut pick = r.random_range(0.0..total_weight);
        let mut country = config.countries[0].0.clone();
        for (c, w) in &config.countries {
            if pick < *w {
                country = c.clone();
                break;
            }
            pick -= w;
        }
        let z: f64 = (0..12).map(|_| r.random::<f64>()).sum::<f64>() - 6.0;
        let age = (config.age_mean + config.age_sd * z).clamp(0.0, 100.0).round();
        let female = r.random_bool(config.female_fraction);
        let age = (!r.random_bool(config.missing_age_rate)).then_some(age);
        let sex = (!r.random_bool(config.missing_sex_rate)).then_some(if female { Sex::Female } else { Sex::Male });
        records.push(PatientRecord {
            image_ref,
            label: if positive { Label::Covid } else { Label::Normal },
            country,
            age,
            sex,
            modality: Modality::Xray,
            source: "synthetic".to_string(),
            age_group: None,
        });
    }
    let manifest = DatasetManifest::new(records)?;
    let manifest_path = dir.join("manifest.csv");
    write_manifest(&manifest_path, &manifest)?;
    let geometry_path = dir.join("geometry.csv");
    let mut w = csv::Writer::from_path(&geometry_path)?;
    for g in &geometry {
        w.serialize(g)?;
    }
    w.flush()?;
    Ok(SynthCorpus {
        manifest,
        geometry,
        manifest_path,
        geometry_path,
    })
}

pub fn read_geometry(path: &Path) -> Result<Vec<Geometry>> {
    let mut r = csv::Reader::from_path(path)?;
    r.deserialize().map(|g| g.map_err(Into::into)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> SynthConfig {
        SynthConfig {
            count: 40,
            image_size: 16,
            ..SynthConfig::default()
        }
    }

    #[test]
    fn counts_and_ratio_are_exact() {
        let dir = tempfile::tempdir().unwrap();
        let c = generate(&small(), dir.path()).unwrap();
        assert_eq!(c.manifest.len(), 40);
        assert_eq!(c.manifest.counts().by_label[&Label::Covid], 22);
        assert_eq!(c.manifest.counts().by_label[&Label::Normal], 18);
        assert_eq!(std::fs::read_dir(dir.path().join("images")).unwrap().count(), 40);
        assert_eq!(read_geometry(&c.geometry_path).unwrap(), c.geometry);
    }

    #[test]
    fn same_seed_is_bit_identical() {
        let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
        generate(&small(), a.path()).unwrap();
        generate(&small(), b.path()).unwrap();
        for name in ["manifest.csv", "geometry.csv", "images/synth_00007.png"] {
            assert_eq!(
                std::fs::read(a.path().join(name)).unwrap(),
                std::fs::read(b.path().join(name)).unwrap()
            );
        }
    }

    #[test]
    fn ellipse_is_brighter_than_background() {
        let cfg = SynthConfig {
            image_size: 64,
            ..SynthConfig::default()
        };
        let (px, shape) = render(&cfg, 3, true);
        let (cx, cy, rx, ry, angle) = shape.unwrap();
        let g = Geometry {
            image_ref: String::new(),
            cx,
            cy,
            rx,
            ry,
            angle,
        };
        let (mut inside, mut outside) = (vec![], vec![]);
        for y in 0..64 {
            for x in 0..64 {
                let v = f64::from(px[y * 64 + x]);
                if g.contains(y as f64, x as f64) {
                    inside.push(v)
                } else {
                    outside.push(v)
                }
            }
        }
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        assert!(mean(&inside) > mean(&outside) + 0.2);
        assert!(render(&cfg, 3, false).1.is_none());
    }
}
