use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::{gemm, Mode, Param, Tensor};
use crate::rng;

/// Coarse classification of a layer, used for introspection (Grad-CAM layer
/// search, layer enumeration for freezing).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LayerKind {
    Conv2d,
    BatchNorm,
    Relu,
    MaxPool2,
    GlobalAvgPool,
    Dropout,
    Dense,
}

#[derive(Clone, Debug)]
pub enum Layer {
    Conv2d(Conv2d),
    BatchNorm(BatchNorm),
    Relu(Relu),
    MaxPool2(MaxPool2),
    GlobalAvgPool(GlobalAvgPool),
    Dropout(Dropout),
    Dense(Dense),
}

impl Layer {
    pub fn relu() -> Self {
        Layer::Relu(Relu::default())
    }

    pub fn max_pool() -> Self {
        Layer::MaxPool2(MaxPool2::default())
    }

    pub fn global_avg_pool() -> Self {
        Layer::GlobalAvgPool(GlobalAvgPool::default())
    }

    pub fn kind(&self) -> LayerKind {
        match self {
            Layer::Conv2d(_) => LayerKind::Conv2d,
            Layer::BatchNorm(_) => LayerKind::BatchNorm,
            Layer::Relu(_) => LayerKind::Relu,
            Layer::MaxPool2(_) => LayerKind::MaxPool2,
            Layer::GlobalAvgPool(_) => LayerKind::GlobalAvgPool,
            Layer::Dropout(_) => LayerKind::Dropout,
            Layer::Dense(_) => LayerKind::Dense,
        }
    }

    /// Output shape for a given input shape.
    pub fn output_shape(&self, input: [usize; 4]) -> [usize; 4] {
        let [n, c, h, w] = input;
        match self {
            Layer::Conv2d(conv) => {
                let (oh, ow) = conv.output_hw(h, w);
                [n, conv.out_channels, oh, ow]
            }
            Layer::MaxPool2(_) => [n, c, h / 2, w / 2],
            Layer::GlobalAvgPool(_) => [n, c, 1, 1],
            Layer::Dense(d) => [n, d.outputs, 1, 1],
            Layer::BatchNorm(_) | Layer::Relu(_) | Layer::Dropout(_) => input,
        }
    }

    pub fn forward(&mut self, x: &Tensor, mode: Mode) -> Tensor {
        match self {
            Layer::Conv2d(l) => l.forward(x),
            Layer::BatchNorm(l) => l.forward(x, mode),
            Layer::Relu(l) => l.forward(x),
            Layer::MaxPool2(l) => l.forward(x),
            Layer::GlobalAvgPool(l) => l.forward(x),
            Layer::Dropout(l) => l.forward(x, mode),
            Layer::Dense(l) => l.forward(x),
        }
    }

    /// Propagates `grad` (w.r.t. this layer's output) backwards. Parameter
    /// gradients are accumulated only when `param_grads` is set; the input
    /// gradient is returned only when `input_grad` is set.
    pub fn backward(&mut self, grad: &Tensor, param_grads: bool, input_grad: bool) -> Option<Tensor> {
        match self {
            Layer::Conv2d(l) => l.backward(grad, param_grads, input_grad),
            Layer::BatchNorm(l) => l.backward(grad, param_grads, input_grad),
            Layer::Relu(l) => input_grad.then(|| l.backward(grad)),
            Layer::MaxPool2(l) => input_grad.then(|| l.backward(grad)),
            Layer::GlobalAvgPool(l) => input_grad.then(|| l.backward(grad)),
            Layer::Dropout(l) => input_grad.then(|| l.backward(grad)),
            Layer::Dense(l) => l.backward(grad, param_grads, input_grad),
        }
    }

    pub fn params(&self) -> Vec<(&'static str, &Param)> {
        match self {
            Layer::Conv2d(l) => vec![("weight", &l.weight), ("bias", &l.bias)],
            Layer::BatchNorm(l) => vec![("gamma", &l.gamma), ("beta", &l.beta)],
            Layer::Dense(l) => vec![("weight", &l.weight), ("bias", &l.bias)],
            _ => Vec::new(),
        }
    }

    pub fn params_mut(&mut self) -> Vec<(&'static str, &mut Param)> {
        match self {
            Layer::Conv2d(l) => vec![("weight", &mut l.weight), ("bias", &mut l.bias)],
            Layer::BatchNorm(l) => vec![("gamma", &mut l.gamma), ("beta", &mut l.beta)],
            Layer::Dense(l) => vec![("weight", &mut l.weight), ("bias", &mut l.bias)],
            _ => Vec::new(),
        }
    }

    /// Non-learnable persistent state (batch-norm moving statistics).
    pub fn buffers(&self) -> Vec<(&'static str, &Vec<f64>)> {
        match self {
            Layer::BatchNorm(l) => vec![("moving_mean", &l.moving_mean), ("moving_var", &l.moving_var)],
            _ => Vec::new(),
        }
    }

    pub fn buffers_mut(&mut self) -> Vec<(&'static str, &mut Vec<f64>)> {
        match self {
            Layer::BatchNorm(l) => vec![("moving_mean", &mut l.moving_mean), ("moving_var", &mut l.moving_var)],
            _ => Vec::new(),
        }
    }

    pub fn param_count(&self) -> usize {
        self.params().iter().map(|(_, p)| p.len()).sum()
    }

    pub fn has_params(&self) -> bool {
        self.param_count() > 0
    }

    pub(crate) fn clear_cache(&mut self) {
        match self {
            Layer::Conv2d(l) => l.input = None,
            Layer::BatchNorm(l) => l.cache = None,
            Layer::Relu(l) => l.mask.clear(),
            Layer::MaxPool2(l) => l.argmax.clear(),
            Layer::Dropout(l) => l.mask = None,
            Layer::Dense(l) => l.input = None,
            Layer::GlobalAvgPool(_) => {}
        }
    }
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    // Box-Muller
    let u1: f64 = rng.random::<f64>().max(f64::MIN_POSITIVE);
    let u2: f64 = rng.random();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

/// Normal initialization with standard deviation `sqrt(2 / fan_in)`.
pub(crate) fn he_normal(len: usize, fan_in: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let std = (2.0 / fan_in as f64).sqrt();
    (0..len).map(|_| normal(rng) * std).collect()
}

/// Uniform initialization in `±sqrt(6 / (fan_in + fan_out))`.
pub(crate) fn glorot_uniform(len: usize, fan_in: usize, fan_out: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
    (0..len).map(|_| rng.random_range(-limit..=limit)).collect()
}

/// 2-D convolution with square kernels, implemented as im2col + GEMM.
#[derive(Clone, Debug)]
pub struct Conv2d {
    pub in_channels: usize,
    pub out_channels: usize,
    pub kernel: usize,
    pub stride: usize,
    pub padding: usize,
    /// `[out, in * k * k]`
    pub weight: Param,
    pub bias: Param,
    input: Option<Tensor>,
}

impl Conv2d {
    pub fn new(
        in_channels: usize,
        out_channels: usize,
        kernel: usize,
        stride: usize,
        padding: usize,
        rng: &mut ChaCha8Rng,
    ) -> Self {
        let fan_in = in_channels * kernel * kernel;
        Self {
            in_channels,
            out_channels,
            kernel,
            stride,
            padding,
            weight: Param::new(he_normal(out_channels * fan_in, fan_in, rng)),
            bias: Param::new(vec![0.0; out_channels]),
            input: None,
        }
    }

    pub fn output_hw(&self, h: usize, w: usize) -> (usize, usize) {
        let oh = (h + 2 * self.padding - self.kernel) / self.stride + 1;
        let ow = (w + 2 * self.padding - self.kernel) / self.stride + 1;
        (oh, ow)
    }

    fn patch_len(&self) -> usize {
        self.in_channels * self.kernel * self.kernel
    }

    fn im2col(&self, x: &[f64], h: usize, w: usize, cols: &mut [f64]) {
        let (oh, ow) = self.output_hw(h, w);
        let k = self.kernel;
        let plane = oh * ow;
        for c in 0..self.in_channels {
            let xc = &x[c * h * w..(c + 1) * h * w];
            for ki in 0..k {
                for kj in 0..k {
                    let row = (c * k + ki) * k + kj;
                    let dst = &mut cols[row * plane..(row + 1) * plane];
                    for oy in 0..oh {
                        let iy = (oy * self.stride + ki) as isize - self.padding as isize;
                        let drow = &mut dst[oy * ow..(oy + 1) * ow];
                        if iy < 0 || iy >= h as isize {
                            drow.iter_mut().for_each(|v| *v = 0.0);
                            continue;
                        }
                        let src = &xc[iy as usize * w..(iy as usize + 1) * w];
                        for (ox, d) in drow.iter_mut().enumerate() {
                            let ix = (ox * self.stride + kj) as isize - self.padding as isize;
                            *d = if ix < 0 || ix >= w as isize {
                                0.0
                            } else {
                                src[ix as usize]
                            };
                        }
                    }
                }
            }
        }
    }

    fn col2im(&self, cols: &[f64], h: usize, w: usize, dx: &mut [f64]) {
        let (oh, ow) = self.output_hw(h, w);
        let k = self.kernel;
        let plane = oh * ow;
        for c in 0..self.in_channels {
            let dxc = &mut dx[c * h * w..(c + 1) * h * w];
            for ki in 0..k {
                for kj in 0..k {
                    let row = (c * k + ki) * k + kj;
                    let src = &cols[row * plane..(row + 1) * plane];
                    for oy in 0..oh {
                        let iy = (oy * self.stride + ki) as isize - self.padding as isize;
                        if iy < 0 || iy >= h as isize {
                            continue;
                        }
                        let drow = &mut dxc[iy as usize * w..(iy as usize + 1) * w];
                        for ox in 0..ow {
                            let ix = (ox * self.stride + kj) as isize - self.padding as isize;
                            if ix >= 0 && ix < w as isize {
                                drow[ix as usize] += src[oy * ow + ox];
                            }
                        }
                    }
                }
            }
        }
    }

    fn forward(&mut self, x: &Tensor) -> Tensor {
        let [n, c, h, w] = x.shape();
        assert_eq!(c, self.in_channels, "conv input channels");
        let (oh, ow) = self.output_hw(h, w);
        let plane = oh * ow;
        let pl = self.patch_len();
        let mut out = Tensor::zeros([n, self.out_channels, oh, ow]);
        let mut cols = vec![0.0; pl * plane];
        for i in 0..n {
            self.im2col(x.sample(i), h, w, &mut cols);
            let y = out.sample_mut(i);
            for (o, row) in y.chunks_mut(plane).enumerate() {
                row.iter_mut().for_each(|v| *v = self.bias.value[o]);
            }
            gemm(
                self.out_channels,
                pl,
                plane,
                &self.weight.value,
                (pl, 1),
                &cols,
                (plane, 1),
                1.0,
                y,
            );
        }
        self.input = Some(x.clone());
        out
    }

    fn backward(&mut self, grad: &Tensor, param_grads: bool, input_grad: bool) -> Option<Tensor> {
        let x = self.input.take().expect("conv backward without forward");
        let [n, _, h, w] = x.shape();
        let (oh, ow) = self.output_hw(h, w);
        let plane = oh * ow;
        let pl = self.patch_len();
        let mut cols = vec![0.0; pl * plane];
        let mut dx = input_grad.then(|| Tensor::zeros(x.shape()));
        for i in 0..n {
            let g = grad.sample(i);
            if param_grads {
                self.im2col(x.sample(i), h, w, &mut cols);
                // dW += dY (out x plane) * cols^T (plane x pl)
                gemm(
                    self.out_channels,
                    plane,
                    pl,
                    g,
                    (plane, 1),
                    &cols,
                    (1, plane),
                    1.0,
                    &mut self.weight.grad,
                );
                for (o, row) in g.chunks(plane).enumerate() {
                    self.bias.grad[o] += row.iter().sum::<f64>();
                }
            }
            if let Some(dx) = dx.as_mut() {
                // dcols = W^T (pl x out) * dY (out x plane)
                gemm(
                    pl,
                    self.out_channels,
                    plane,
                    &self.weight.value,
                    (1, pl),
                    g,
                    (plane, 1),
                    0.0,
                    &mut cols,
                );
                self.col2im(&cols, h, w, dx.sample_mut(i));
            }
        }
        dx
    }
}

#[derive(Clone, Debug)]
struct BnCache {
    normalized: Vec<f64>,
    inv_std: Vec<f64>,
    batch_stats: bool,
}

/// Per-channel batch normalization over `(n, h, w)`.
#[derive(Clone, Debug)]
pub struct BatchNorm {
    pub channels: usize,
    pub momentum: f64,
    pub epsilon: f64,
    pub gamma: Param,
    pub beta: Param,
    pub moving_mean: Vec<f64>,
    pub moving_var: Vec<f64>,
    cache: Option<BnCache>,
}

impl BatchNorm {
    pub fn new(channels: usize) -> Self {
        Self {
            channels,
            momentum: 0.99,
            epsilon: 1e-3,
            gamma: Param::new(vec![1.0; channels]),
            beta: Param::new(vec![0.0; channels]),
            moving_mean: vec![0.0; channels],
            moving_var: vec![1.0; channels],
            cache: None,
        }
    }

    fn forward(&mut self, x: &Tensor, mode: Mode) -> Tensor {
        let [n, c, h, w] = x.shape();
        assert_eq!(c, self.channels, "batch norm channels");
        let plane = h * w;
        let count = (n * plane) as f64;
        let batch_stats = mode == Mode::Train;
        let (mean, var) = if batch_stats {
            let mut mean = vec![0.0; c];
            let mut var = vec![0.0; c];
            for i in 0..n {
                for (ch, chunk) in x.sample(i).chunks(plane).enumerate() {
                    mean[ch] += chunk.iter().sum::<f64>();
                }
            }
            mean.iter_mut().for_each(|m| *m /= count);
            for i in 0..n {
                for (ch, chunk) in x.sample(i).chunks(plane).enumerate() {
                    var[ch] += chunk.iter().map(|v| (v - mean[ch]).powi(2)).sum::<f64>();
                }
            }
            var.iter_mut().for_each(|v| *v /= count);
            for ch in 0..c {
                self.moving_mean[ch] = self.momentum * self.moving_mean[ch] + (1.0 - self.momentum) * mean[ch];
                self.moving_var[ch] = self.momentum * self.moving_var[ch] + (1.0 - self.momentum) * var[ch];
            }
            (mean, var)
        } else {
            (self.moving_mean.clone(), self.moving_var.clone())
        };
        let inv_std: Vec<f64> = var.iter().map(|v| 1.0 / (v + self.epsilon).sqrt()).collect();
        let mut normalized = vec![0.0; x.data().len()];
        let mut out = Tensor::zeros(x.shape());
        let sl = x.sample_len();
        for i in 0..n {
            let xs = x.sample(i);
            let ys = out.sample_mut(i);
            let ns = &mut normalized[i * sl..(i + 1) * sl];
            for ch in 0..c {
                for j in ch * plane..(ch + 1) * plane {
                    let xh = (xs[j] - mean[ch]) * inv_std[ch];
                    ns[j] = xh;
                    ys[j] = self.gamma.value[ch] * xh + self.beta.value[ch];
                }
            }
        }
        self.cache = Some(BnCache {
            normalized,
            inv_std,
            batch_stats,
        });
        out
    }

    fn backward(&mut self, grad: &Tensor, param_grads: bool, input_grad: bool) -> Option<Tensor> {
        let cache = self.cache.take().expect("batch norm backward without forward");
        let [n, c, h, w] = grad.shape();
        let plane = h * w;
        let count = (n * plane) as f64;
        let sl = grad.sample_len();
        let mut sum_dy = vec![0.0; c];
        let mut sum_dy_xh = vec![0.0; c];
        for i in 0..n {
            let g = grad.sample(i);
            let xh = &cache.normalized[i * sl..(i + 1) * sl];
            for ch in 0..c {
                for j in ch * plane..(ch + 1) * plane {
                    sum_dy[ch] += g[j];
                    sum_dy_xh[ch] += g[j] * xh[j];
                }
            }
        }
        if param_grads {
            for ch in 0..c {
                self.gamma.grad[ch] += sum_dy_xh[ch];
                self.beta.grad[ch] += sum_dy[ch];
            }
        }
        if !input_grad {
            return None;
        }
        let mut dx = Tensor::zeros(grad.shape());
        for i in 0..n {
            let g = grad.sample(i);
            let xh = &cache.normalized[i * sl..(i + 1) * sl];
            let d = dx.sample_mut(i);
            for ch in 0..c {
                let scale = self.gamma.value[ch] * cache.inv_std[ch];
                for j in ch * plane..(ch + 1) * plane {
                    d[j] = if cache.batch_stats {
                        scale * (g[j] - sum_dy[ch] / count - xh[j] * sum_dy_xh[ch] / count)
                    } else {
                        scale * g[j]
                    };
                }
            }
        }
        Some(dx)
    }
}

#[derive(Clone, Debug, Default)]
pub struct Relu {
    mask: Vec<bool>,
}

impl Relu {
    fn forward(&mut self, x: &Tensor) -> Tensor {
        self.mask = x.data().iter().map(|&v| v > 0.0).collect();
        x.clone().map(|v| v.max(0.0))
    }

    fn backward(&mut self, grad: &Tensor) -> Tensor {
        let mut dx = grad.clone();
        for (d, &m) in dx.data_mut().iter_mut().zip(&self.mask) {
            if !m {
                *d = 0.0;
            }
        }
        dx
    }
}

/// 2x2 max pooling with stride 2 (odd trailing rows/columns are dropped).
#[derive(Clone, Debug, Default)]
pub struct MaxPool2 {
    argmax: Vec<usize>,
    input_shape: [usize; 4],
}

impl MaxPool2 {
    fn forward(&mut self, x: &Tensor) -> Tensor {
        let [n, c, h, w] = x.shape();
        let (oh, ow) = (h / 2, w / 2);
        let mut out = Tensor::zeros([n, c, oh, ow]);
        self.argmax = Vec::with_capacity(n * c * oh * ow);
        self.input_shape = x.shape();
        let data = x.data();
        let o = out.data_mut();
        let mut k = 0;
        for nc in 0..n * c {
            let base = nc * h * w;
            for oy in 0..oh {
                for ox in 0..ow {
                    let mut best = base + 2 * oy * w + 2 * ox;
                    for (dy, dx) in [(0, 1), (1, 0), (1, 1)] {
                        let idx = base + (2 * oy + dy) * w + 2 * ox + dx;
                        if data[idx] > data[best] {
                            best = idx;
                        }
                    }
                    o[k] = data[best];
                    self.argmax.push(best);
                    k += 1;
                }
            }
        }
        out
    }

    fn backward(&mut self, grad: &Tensor) -> Tensor {
        let mut dx = Tensor::zeros(self.input_shape);
        let d = dx.data_mut();
        for (g, &idx) in grad.data().iter().zip(&self.argmax) {
            d[idx] += g;
        }
        dx
    }
}

#[derive(Clone, Debug, Default)]
pub struct GlobalAvgPool {
    input_shape: [usize; 4],
}

impl GlobalAvgPool {
    fn forward(&mut self, x: &Tensor) -> Tensor {
        let [n, c, h, w] = x.shape();
        self.input_shape = x.shape();
        let plane = h * w;
        let data = x
            .data()
            .chunks(plane)
            .map(|ch| ch.iter().sum::<f64>() / plane as f64)
            .collect();
        Tensor::from_vec([n, c, 1, 1], data).expect("pooled shape")
    }

    fn backward(&mut self, grad: &Tensor) -> Tensor {
        let [_, _, h, w] = self.input_shape;
        let plane = h * w;
        let mut dx = Tensor::zeros(self.input_shape);
        for (chunk, g) in dx.data_mut().chunks_mut(plane).zip(grad.data()) {
            chunk.iter_mut().for_each(|v| *v = g / plane as f64);
        }
        dx
    }
}

/// Inverted dropout: kept units are scaled by `1 / (1 - rate)` during training.
#[derive(Clone, Debug)]
pub struct Dropout {
    pub rate: f64,
    rng: ChaCha8Rng,
    mask: Option<Vec<f64>>,
}

impl Dropout {
    pub fn new(rate: f64, seed: u64) -> Self {
        Self {
            rate,
            rng: rng::keyed(seed, &[0xD20]),
            mask: None,
        }
    }

    pub fn reseed(&mut self, seed: u64) {
        self.rng = rng::keyed(seed, &[0xD20]);
    }

    fn forward(&mut self, x: &Tensor, mode: Mode) -> Tensor {
        if mode == Mode::Infer || self.rate == 0.0 {
            self.mask = None;
            return x.clone();
        }
        let keep = 1.0 - self.rate;
        let mask: Vec<f64> = (0..x.data().len())
            .map(|_| {
                if self.rng.random::<f64>() < keep {
                    1.0 / keep
                } else {
                    0.0
                }
            })
            .collect();
        let mut out = x.clone();
        out.data_mut().iter_mut().zip(&mask).for_each(|(v, m)| *v *= m);
        self.mask = Some(mask);
        out
    }

    fn backward(&mut self, grad: &Tensor) -> Tensor {
        let mut dx = grad.clone();
        if let Some(mask) = self.mask.take() {
            dx.data_mut().iter_mut().zip(&mask).for_each(|(v, m)| *v *= m);
        }
        dx
    }
}

/// Fully connected layer over `(n, features, 1, 1)` inputs.
#[derive(Clone, Debug)]
pub struct Dense {
    pub inputs: usize,
    pub outputs: usize,
    /// `[out, in]`
    pub weight: Param,
    pub bias: Param,
    input: Option<Tensor>,
}

impl Dense {
    pub fn he_normal(inputs: usize, outputs: usize, rng: &mut ChaCha8Rng) -> Self {
        Self::with_weights(inputs, outputs, he_normal(inputs * outputs, inputs, rng))
    }

    pub fn glorot_uniform(inputs: usize, outputs: usize, rng: &mut ChaCha8Rng) -> Self {
        Self::with_weights(inputs, outputs, glorot_uniform(inputs * outputs, inputs, outputs, rng))
    }

    fn with_weights(inputs: usize, outputs: usize, weights: Vec<f64>) -> Self {
        Self {
            inputs,
            outputs,
            weight: Param::new(weights),
            bias: Param::new(vec![0.0; outputs]),
            input: None,
        }
    }

    fn forward(&mut self, x: &Tensor) -> Tensor {
        let n = x.batch();
        assert_eq!(x.sample_len(), self.inputs, "dense input width");
        let mut out = Tensor::zeros([n, self.outputs, 1, 1]);
        for row in out.data_mut().chunks_mut(self.outputs) {
            row.copy_from_slice(&self.bias.value);
        }
        // Y (n x out) = X (n x in) * W^T (in x out)
        gemm(
            n,
            self.inputs,
            self.outputs,
            x.data(),
            (self.inputs, 1),
            &self.weight.value,
            (1, self.inputs),
            1.0,
            out.data_mut(),
        );
        self.input = Some(x.clone());
        out
    }

    fn backward(&mut self, grad: &Tensor, param_grads: bool, input_grad: bool) -> Option<Tensor> {
        let x = self.input.take().expect("dense backward without forward");
        let n = x.batch();
        if param_grads {
            // dW (out x in) += dY^T (out x n) * X (n x in)
            gemm(
                self.outputs,
                n,
                self.inputs,
                grad.data(),
                (1, self.outputs),
                x.data(),
                (self.inputs, 1),
                1.0,
                &mut self.weight.grad,
            );
            for row in grad.data().chunks(self.outputs) {
                for (b, g) in self.bias.grad.iter_mut().zip(row) {
                    *b += g;
                }
            }
        }
        input_grad.then(|| {
            let mut dx = Tensor::zeros(x.shape());
            // dX (n x in) = dY (n x out) * W (out x in)
            gemm(
                n,
                self.outputs,
                self.inputs,
                grad.data(),
                (self.outputs, 1),
                &self.weight.value,
                (self.inputs, 1),
                0.0,
                dx.data_mut(),
            );
            dx
        })
    }
}
