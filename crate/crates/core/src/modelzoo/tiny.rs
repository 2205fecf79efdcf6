use rand_chacha::ChaCha8Rng;

use crate::nn::{BatchNorm, Conv2d, Layer, Network};

const CHANNELS: [usize; 5] = [3, 8, 16, 48, 64];

/// Weight-bearing layers (4 conv + 4 batch norm) counted by the freeze policy.
pub const WEIGHT_LAYERS: usize = 8;

/// Smallest input side that survives three 2x2 poolings.
pub const MIN_INPUT: usize = 8;

/// Four 3x3 conv / batch-norm / ReLU blocks, max-pooled after the first three.
/// Returns the number of output channels.
pub(super) fn push_backbone(net: &mut Network, rng: &mut ChaCha8Rng) -> usize {
    for b in 0..4 {
        let (cin, cout) = (CHANNELS[b], CHANNELS[b + 1]);
        let i = b + 1;
        net.push(
            format!("block{i}_conv"),
            Layer::Conv2d(Conv2d::new(cin, cout, 3, 1, 1, rng)),
        );
        net.push(format!("block{i}_bn"), Layer::BatchNorm(BatchNorm::new(cout)));
        net.push(format!("block{i}_relu"), Layer::relu());
        if b < 3 {
            net.push(format!("block{i}_pool"), Layer::max_pool());
        }
    }
    CHANNELS[4]
}
