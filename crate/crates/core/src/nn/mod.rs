//! A small CPU convolutional network engine with explicit backward passes.
//!
//! Tensors are dense `f64` arrays in NCHW order. Each layer caches what it
//! needs during `forward` and consumes it in `backward`, accumulating
//! parameter gradients into its [`Param`]s.

mod layers;
mod network;
mod tensor;

pub use layers::{BatchNorm, Conv2d, Dense, Dropout, Layer, LayerKind, MaxPool2};
pub use network::{NamedLayer, Network};
pub use tensor::Tensor;

/// Whether layers run with training-time behavior (batch statistics,
/// active dropout) or inference-time behavior.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Train,
    Infer,
}

/// A learnable parameter and its accumulated gradient.
#[derive(Clone, Debug, PartialEq)]
pub struct Param {
    pub value: Vec<f64>,
    pub grad: Vec<f64>,
    /// L2 penalty coefficient applied to this parameter (0 for none).
    pub l2: f64,
}

impl Param {
    pub fn new(value: Vec<f64>) -> Self {
        let grad = vec![0.0; value.len()];
        Self { value, grad, l2: 0.0 }
    }

    pub fn len(&self) -> usize {
        self.value.len()
    }

    pub fn is_empty(&self) -> bool {
        self.value.is_empty()
    }

    pub fn zero_grad(&mut self) {
        self.grad.iter_mut().for_each(|g| *g = 0.0);
    }

    /// `l2 * sum(w^2)`
    pub fn penalty(&self) -> f64 {
        if self.l2 == 0.0 {
            0.0
        } else {
            self.l2 * self.value.iter().map(|w| w * w).sum::<f64>()
        }
    }

    /// Adds the gradient of [`Param::penalty`] to `grad`.
    pub fn add_penalty_grad(&mut self) {
        if self.l2 != 0.0 {
            for (g, w) in self.grad.iter_mut().zip(&self.value) {
                *g += 2.0 * self.l2 * w;
            }
        }
    }
}

/// Row-major `c = alpha * a(m x k) * b(k x n) + beta * c` with explicit strides.
#[allow(clippy::too_many_arguments)]
pub(crate) fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    (rsa, csa): (usize, usize),
    b: &[f64],
    (rsb, csb): (usize, usize),
    beta: f64,
    c: &mut [f64],
) {
    if m == 0 || n == 0 {
        return;
    }
    debug_assert!(m == 0 || k == 0 || (m - 1) * rsa + (k - 1) * csa < a.len());
    debug_assert!(k == 0 || (k - 1) * rsb + (n - 1) * csb < b.len());
    assert!(c.len() >= m * n);
    // SAFETY: the asserts above bound every index the kernel touches; `c` is
    // contiguous row-major with row stride `n`.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            rsa as isize,
            csa as isize,
            b.as_ptr(),
            rsb as isize,
            csb as isize,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}
