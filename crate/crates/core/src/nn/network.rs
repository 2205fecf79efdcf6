use super::{Layer, LayerKind, Mode, Param, Tensor};
use crate::error::{Error, Result};

#[derive(Clone, Debug)]
pub struct NamedLayer {
    pub name: String,
    pub layer: Layer,
    pub trainable: bool,
}

/// A sequential stack of layers.
#[derive(Clone, Debug)]
pub struct Network {
    input: [usize; 3],
    layers: Vec<NamedLayer>,
    /// Non-trainable batch-norm layers use moving statistics even in
    /// training mode.
    pub frozen_bn_inference: bool,
}

impl Network {
    /// `input` is `(channels, height, width)`.
    pub fn new(input: [usize; 3]) -> Self {
        Self {
            input,
            layers: Vec::new(),
            frozen_bn_inference: true,
        }
    }

    pub fn push(&mut self, name: impl Into<String>, layer: Layer) {
        self.layers.push(NamedLayer {
            name: name.into(),
            layer,
            trainable: true,
        });
    }

    pub fn input_shape(&self) -> [usize; 3] {
        self.input
    }

    pub fn layers(&self) -> &[NamedLayer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [NamedLayer] {
        &mut self.layers
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.layers.iter().position(|l| l.name == name)
    }

    /// Output shape of every layer for a batch of one.
    pub fn shapes(&self) -> Vec<[usize; 4]> {
        let [c, h, w] = self.input;
        let mut shape = [1, c, h, w];
        self.layers
            .iter()
            .map(|l| {
                shape = l.layer.output_shape(shape);
                shape
            })
            .collect()
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.layer.param_count()).sum()
    }

    pub fn trainable_param_count(&self) -> usize {
        self.layers
            .iter()
            .filter(|l| l.trainable)
            .map(|l| l.layer.param_count())
            .sum()
    }

    fn check_input(&self, x: &Tensor) -> Result<()> {
        let [_, c, h, w] = x.shape();
        if [c, h, w] != self.input {
            return Err(Error::shape(format!(
                "network expects (N, {}, {}, {}) input, got {:?}",
                self.input[0],
                self.input[1],
                self.input[2],
                x.shape()
            )));
        }
        Ok(())
    }

    fn layer_mode(&self, idx: usize, mode: Mode) -> Mode {
        let l = &self.layers[idx];
        if mode == Mode::Train && !l.trainable && self.frozen_bn_inference && l.layer.kind() == LayerKind::BatchNorm {
            Mode::Infer
        } else {
            mode
        }
    }

    pub fn forward(&mut self, x: &Tensor, mode: Mode) -> Result<Tensor> {
        self.forward_capture(x, mode, None).map(|(out, _)| out)
    }

    /// Runs the network and additionally returns the output of layer
    /// `capture`, if given.
    pub fn forward_capture(
        &mut self,
        x: &Tensor,
        mode: Mode,
        capture: Option<usize>,
    ) -> Result<(Tensor, Option<Tensor>)> {
        self.check_input(x)?;
        let mut h = x.clone();
        let mut captured = None;
        for idx in 0..self.layers.len() {
            let m = self.layer_mode(idx, mode);
            h = self.layers[idx].layer.forward(&h, m);
            if capture == Some(idx) {
                captured = Some(h.clone());
            }
        }
        Ok((h, captured))
    }

    /// Backpropagates `grad` (w.r.t. the network output) through every layer,
    /// accumulating gradients of trainable parameters.
    pub fn backward(&mut self, grad: &Tensor) {
        let first_trainable = self.layers.iter().position(|l| l.trainable && l.layer.has_params());
        let Some(first) = first_trainable else {
            self.clear_caches();
            return;
        };
        let mut g = grad.clone();
        for idx in (first..self.layers.len()).rev() {
            let l = &mut self.layers[idx];
            let param_grads = l.trainable;
            match l.layer.backward(&g, param_grads, idx > first) {
                Some(next) => g = next,
                None => break,
            }
        }
        self.clear_caches();
    }

    /// Backpropagates `grad` from the output down to the output of layer
    /// `layer` and returns the gradient there. Parameter gradients are left
    /// untouched.
    pub fn gradient_at(&mut self, grad: &Tensor, layer: usize) -> Tensor {
        let mut g = grad.clone();
        for idx in (layer + 1..self.layers.len()).rev() {
            g = self.layers[idx]
                .layer
                .backward(&g, false, true)
                .expect("input gradient requested");
        }
        self.clear_caches();
        g
    }

    fn clear_caches(&mut self) {
        self.layers.iter_mut().for_each(|l| l.layer.clear_cache());
    }

    pub fn zero_grad(&mut self) {
        for l in &mut self.layers {
            for (_, p) in l.layer.params_mut() {
                p.zero_grad();
            }
        }
    }

    /// All parameters in a stable order, paired with their global index.
    /// Frozen layers are skipped but still consume indices.
    pub fn trainable_params_mut(&mut self) -> Vec<(usize, &mut Param)> {
        let mut out = Vec::new();
        let mut id = 0;
        for l in &mut self.layers {
            let trainable = l.trainable;
            for (_, p) in l.layer.params_mut() {
                if trainable {
                    out.push((id, p));
                }
                id += 1;
            }
        }
        out
    }

    /// Sum of L2 penalties over trainable parameters.
    pub fn penalty(&self) -> f64 {
        self.layers
            .iter()
            .filter(|l| l.trainable)
            .flat_map(|l| l.layer.params())
            .map(|(_, p)| p.penalty())
            .sum()
    }

    /// Named snapshot of all parameters and buffers, `layer.param` keyed.
    pub fn state(&self) -> Vec<(String, Vec<f64>)> {
        let mut out = Vec::new();
        for l in &self.layers {
            for (pname, p) in l.layer.params() {
                out.push((format!("{}.{}", l.name, pname), p.value.clone()));
            }
            for (bname, b) in l.layer.buffers() {
                out.push((format!("{}.{}", l.name, bname), b.clone()));
            }
        }
        out
    }

    /// Restores a snapshot produced by [`Network::state`].
    pub fn load_state(&mut self, state: &[(String, Vec<f64>)]) -> Result<()> {
        let lookup: std::collections::HashMap<&str, &Vec<f64>> = state.iter().map(|(k, v)| (k.as_str(), v)).collect();
        for l in &mut self.layers {
            let name = l.name.clone();
            let assign = |key: String, dst: &mut Vec<f64>| -> Result<()> {
                let src = lookup
                    .get(key.as_str())
                    .ok_or_else(|| Error::Checkpoint(format!("missing tensor `{key}`")))?;
                if src.len() != dst.len() {
                    return Err(Error::Checkpoint(format!(
                        "tensor `{key}` has {} values, expected {}",
                        src.len(),
                        dst.len()
                    )));
                }
                dst.copy_from_slice(src);
                Ok(())
            };
            for (pname, p) in l.layer.params_mut() {
                assign(format!("{name}.{pname}"), &mut p.value)?;
            }
            for (bname, b) in l.layer.buffers_mut() {
                assign(format!("{name}.{bname}"), b)?;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{BatchNorm, Conv2d, Dense};
    use crate::rng;

    fn tiny() -> Network {
        let mut r = rng::keyed(1, &[]);
        let mut net = Network::new([2, 6, 6]);
        net.push("conv", Layer::Conv2d(Conv2d::new(2, 3, 3, 1, 1, &mut r)));
        net.push("bn", Layer::BatchNorm(BatchNorm::new(3)));
        net.push("relu", Layer::relu());
        net.push("pool", Layer::max_pool());
        net.push("gap", Layer::global_avg_pool());
        net.push("dense", Layer::Dense(Dense::glorot_uniform(3, 2, &mut r)));
        net
    }

    fn input(n: usize) -> Tensor {
        let mut r = rng::keyed(2, &[]);
        use rand::Rng;
        let data = (0..n * 72).map(|_| r.random_range(-1.0..1.0)).collect();
        Tensor::from_vec([n, 2, 6, 6], data).unwrap()
    }

    // sum of outputs weighted by fixed coefficients
    fn objective(net: &mut Network, x: &Tensor) -> f64 {
        let out = net.forward(x, Mode::Train).unwrap();
        out.data()
            .iter()
            .enumerate()
            .map(|(i, v)| v * (1.0 + i as f64 * 0.1))
            .sum()
    }

    #[test]
    fn shapes_follow_layers() {
        let net = tiny();
        assert_eq!(
            net.shapes(),
            vec![
                [1, 3, 6, 6],
                [1, 3, 6, 6],
                [1, 3, 6, 6],
                [1, 3, 3, 3],
                [1, 3, 1, 1],
                [1, 2, 1, 1]
            ]
        );
    }

    #[test]
    fn rejects_wrong_input_shape() {
        let mut net = tiny();
        let x = Tensor::zeros([1, 3, 6, 6]);
        assert!(matches!(net.forward(&x, Mode::Infer), Err(Error::Shape(_))));
    }

    #[test]
    fn parameter_gradients_match_finite_differences() {
        let mut net = tiny();
        let x = input(3);
        let out = net.forward(&x, Mode::Train).unwrap();
        let coeffs: Vec<f64> = (0..out.data().len()).map(|i| 1.0 + i as f64 * 0.1).collect();
        let grad = Tensor::from_vec(out.shape(), coeffs).unwrap();
        net.zero_grad();
        net.backward(&grad);
        let analytic: Vec<Vec<f64>> = net
            .trainable_params_mut()
            .into_iter()
            .map(|(_, p)| p.grad.clone())
            .collect();
        let eps = 1e-6;
        for (pi, grads) in analytic.iter().enumerate() {
            for j in (0..grads.len()).step_by(3) {
                let bump = |delta: f64| {
                    let mut probe = net.clone();
                    probe.trainable_params_mut()[pi].1.value[j] += delta;
                    objective(&mut probe, &x)
                };
                let numeric = (bump(eps) - bump(-eps)) / (2.0 * eps);
                let scale = numeric.abs().max(grads[j].abs()).max(1e-6);
                assert!(
                    (numeric - grads[j]).abs() / scale < 1e-5,
                    "param {pi}[{j}]: analytic {} numeric {numeric}",
                    grads[j]
                );
            }
        }
    }

    #[test]
    fn input_gradient_matches_finite_differences() {
        let mut net = tiny();
        let x = input(2);
        let out = net.forward(&x, Mode::Infer).unwrap();
        let grad = Tensor::from_vec(out.shape(), vec![1.0; out.data().len()]).unwrap();
        // gradient w.r.t. the conv output (layer 0)
        let (_, feat) = net.forward_capture(&x, Mode::Infer, Some(0)).unwrap();
        let g = net.gradient_at(&grad, 0);
        let feat = feat.unwrap();
        let eps = 1e-6;
        let rest = |f: &Tensor| {
            let mut probe = net.clone();
            let mut h = f.clone();
            for l in probe.layers_mut().iter_mut().skip(1) {
                h = l.layer.forward(&h, Mode::Infer);
            }
            h.data().iter().sum::<f64>()
        };
        for j in (0..feat.data().len()).step_by(7) {
            let mut up = feat.clone();
            up.data_mut()[j] += eps;
            let mut down = feat.clone();
            down.data_mut()[j] -= eps;
            let numeric = (rest(&up) - rest(&down)) / (2.0 * eps);
            assert!(
                (numeric - g.data()[j]).abs() < 1e-6,
                "{j}: {numeric} vs {}",
                g.data()[j]
            );
        }
    }

    #[test]
    fn state_round_trips() {
        let mut a = tiny();
        a.forward(&input(2), Mode::Train).unwrap();
        let mut b = tiny();
        b.layers_mut()[0].layer.params_mut()[0].1.value[0] = 9.0;
        b.load_state(&a.state()).unwrap();
        assert_eq!(a.state(), b.state());
    }
}
