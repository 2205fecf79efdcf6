//! Image decoding, augmentation, class balancing and batching.

mod augment;
mod balance;
mod batching;
mod dataset;
mod image;

pub use augment::{apply_augmentation, apply_params, AugmentParams, AugmentationPolicy};
pub use balance::{execute_plan, plan_balancing, BalancingCell, BalancingPlan};
pub use batching::{steps_per_epoch, BatchStats, BatchStream, BatchingConfig};
pub use dataset::ImageDataset;
pub use image::{decode_and_preprocess, stack, ImageStore, ImageTensor};
