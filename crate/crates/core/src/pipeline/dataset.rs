use super::image::{stack, ImageStore, ImageTensor};
use crate::data_model::DatasetManifest;
use crate::error::{Error, Result};
use crate::nn::Tensor;

/// Decoded images of one split with their class indices, in manifest order.
#[derive(Clone, Debug)]
pub struct ImageDataset {
    pub images: Vec<ImageTensor>,
    pub labels: Vec<usize>,
    pub refs: Vec<String>,
    pub num_classes: usize,
}

impl ImageDataset {
    pub fn new(images: Vec<ImageTensor>, labels: Vec<usize>, num_classes: usize) -> Result<Self> {
        if images.len() != labels.len() {
            return Err(Error::shape(format!(
                "{} images but {} labels",
                images.len(),
                labels.len()
            )));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= num_classes.max(2)) {
            return Err(Error::range(
                "class index",
                bad as f64,
                format!("[0, {})", num_classes.max(2)),
            ));
        }
        let refs = (0..images.len()).map(|i| format!("#{i}")).collect();
        Ok(Self {
            images,
            labels,
            refs,
            num_classes,
        })
    }

    /// Decodes every record of `manifest` at `size` (`(height, width)`).
    pub fn load(
        manifest: &DatasetManifest,
        store: &ImageStore,
        size: (usize, usize),
        num_classes: usize,
    ) -> Result<Self> {
        let mut images = Vec::with_capacity(manifest.len());
        let mut labels = Vec::with_capacity(manifest.len());
        let mut refs = Vec::with_capacity(manifest.len());
        for r in manifest.records() {
            images.push(store.load(&r.image_ref, Some(size))?);
            labels.push(r.label.class_index(num_classes));
            refs.push(r.image_ref.clone());
        }
        Ok(Self {
            images,
            labels,
            refs,
            num_classes,
        })
    }

    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }

    pub fn batch(&self, indices: &[usize]) -> Result<(Tensor, Vec<usize>)> {
        let imgs: Vec<&ImageTensor> = indices.iter().map(|&i| &self.images[i]).collect();
        Ok((stack(&imgs)?, indices.iter().map(|&i| self.labels[i]).collect()))
    }
}
