use std::path::{Path, PathBuf};

use image::imageops::FilterType;
use image::{GrayImage, RgbImage};

use crate::error::{Error, Result};
use crate::nn::Tensor;

/// A 3-channel image in CHW order with values in `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct ImageTensor {
    height: usize,
    width: usize,
    data: Vec<f32>,
}

impl ImageTensor {
    pub const CHANNELS: usize = 3;

    /// Builds a 3-channel image by replicating a single grayscale plane.
    pub fn from_gray(height: usize, width: usize, gray: &[f32]) -> Result<Self> {
        if gray.len() != height * width {
            return Err(Error::shape(format!(
                "{height}x{width} image needs {} values, got {}",
                height * width,
                gray.len()
            )));
        }
        let mut data = Vec::with_capacity(3 * gray.len());
        for _ in 0..3 {
            data.extend(gray.iter().map(|v| v.clamp(0.0, 1.0)));
        }
        Ok(Self { height, width, data })
    }

    /// CHW data with exactly three channels.
    pub fn from_chw(height: usize, width: usize, data: Vec<f32>) -> Result<Self> {
        if data.len() != 3 * height * width {
            return Err(Error::shape(format!(
                "3x{height}x{width} image needs {} values, got {}",
                3 * height * width,
                data.len()
            )));
        }
        Ok(Self { height, width, data })
    }

    pub fn constant(height: usize, width: usize, value: f32) -> Self {
        Self {
            height,
            width,
            data: vec![value.clamp(0.0, 1.0); 3 * height * width],
        }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn plane(&self, channel: usize) -> &[f32] {
        let n = self.height * self.width;
        &self.data[channel * n..(channel + 1) * n]
    }

    pub fn get(&self, channel: usize, y: usize, x: usize) -> f32 {
        self.data[(channel * self.height + y) * self.width + x]
    }

    /// Channel mean, i.e. the luminance of a replicated grayscale image.
    pub fn gray(&self) -> Vec<f32> {
        let n = self.height * self.width;
        (0..n)
            .map(|i| (self.data[i] + self.data[n + i] + self.data[2 * n + i]) / 3.0)
            .collect()
    }

    pub fn is_grayscale(&self) -> bool {
        let n = self.height * self.width;
        (0..n).all(|i| self.data[i] == self.data[n + i] && self.data[i] == self.data[2 * n + i])
    }

    /// Writes an 8-bit PNG (single channel when the channels are identical).
    pub fn save_png(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent)?;
        }
        let to_u8 = |v: f32| (v.clamp(0.0, 1.0) * 255.0).round() as u8;
        let (w, h) = (self.width as u32, self.height as u32);
        if self.is_grayscale() {
            let img = GrayImage::from_fn(w, h, |x, y| image::Luma([to_u8(self.get(0, y as usize, x as usize))]));
            img.save(path)?;
        } else {
            let img = RgbImage::from_fn(w, h, |x, y| {
                let (x, y) = (x as usize, y as usize);
                image::Rgb([
                    to_u8(self.get(0, y, x)),
                    to_u8(self.get(1, y, x)),
                    to_u8(self.get(2, y, x)),
                ])
            });
            img.save(path)?;
        }
        Ok(())
    }
}

/// Stacks images into an `(n, 3, h, w)` tensor.
pub fn stack(images: &[&ImageTensor]) -> Result<Tensor> {
    let Some(first) = images.first() else {
        return Err(Error::EmptyDataset("cannot stack zero images".to_string()));
    };
    let (h, w) = (first.height, first.width);
    let mut data = Vec::with_capacity(images.len() * 3 * h * w);
    for img in images {
        if (img.height, img.width) != (h, w) {
            return Err(Error::shape(format!(
                "mixed image sizes {h}x{w} and {}x{}",
                img.height, img.width
            )));
        }
        data.extend(img.data.iter().map(|&v| f64::from(v)));
    }
    Tensor::from_vec([images.len(), 3, h, w], data)
}

/// Resolves manifest `image_ref`s to files: relative references are taken
/// relative to `root`.
#[derive(Clone, Debug)]
pub struct ImageStore {
    root: PathBuf,
}

impl ImageStore {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn resolve(&self, image_ref: &str) -> PathBuf {
        let p = Path::new(image_ref);
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.root.join(p)
        }
    }

    /// The reference to record for a file written under `path`.
    pub fn reference_for(&self, path: &Path) -> String {
        path.strip_prefix(&self.root)
            .unwrap_or(path)
            .to_string_lossy()
            .replace('\\', "/")
    }

    pub fn load(&self, image_ref: &str, target: Option<(usize, usize)>) -> Result<ImageTensor> {
        decode_at(&self.resolve(image_ref), image_ref, target)
    }
}

/// Decodes a PNG/JPEG, converts it to luminance, resizes it to `target`
/// (`(height, width)`) and replicates the result across three channels with
/// values in `[0, 1]`.
pub fn decode_and_preprocess(path: impl AsRef<Path>, target: (usize, usize)) -> Result<ImageTensor> {
    let path = path.as_ref();
    decode_at(path, &path.to_string_lossy(), Some(target))
}

fn decode_at(path: &Path, image_ref: &str, target: Option<(usize, usize)>) -> Result<ImageTensor> {
    let decode_err = |message: String| Error::Decode {
        image_ref: image_ref.to_string(),
        message,
    };
    let img = image::ImageReader::open(path)
        .map_err(|e| decode_err(e.to_string()))?
        .with_guessed_format()
        .map_err(|e| decode_err(e.to_string()))?
        .decode()
        .map_err(|e| decode_err(e.to_string()))?;
    let mut gray = img.to_luma8();
    if let Some((h, w)) = target {
        if h == 0 || w == 0 {
            return Err(Error::config(format!("target size {h}x{w} must be positive")));
        }
        if (gray.height() as usize, gray.width() as usize) != (h, w) {
            gray = image::imageops::resize(&gray, w as u32, h as u32, FilterType::Triangle);
        }
    }
    let (h, w) = (gray.height() as usize, gray.width() as usize);
    let values: Vec<f32> = gray.as_raw().iter().map(|&v| f32::from(v) / 255.0).collect();
    ImageTensor::from_gray(h, w, &values)
}
