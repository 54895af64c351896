//! Network layers with forward passes and analytic backward passes.
//!
//! Layers that take part in training cache what their backward pass needs
//! during [`Layer::forward_train`]; [`Layer::backward`] consumes that cache.

mod conv;
mod dense;
mod lstm;
mod pool;
mod relu;
mod rescale;

pub use conv::{conv1d_forward, Conv1DParams, Conv1d};
pub use dense::{dense_forward, Dense, DenseParams};
pub use lstm::{lstm_forward, lstm_step, GateParams, LSTMParams, Lstm};
pub use pool::{maxpool1d_forward, MaxPool1d};
pub use relu::Relu;
pub use rescale::{rescale, Rescale};

use rand::Rng;

use crate::error::Result;
use crate::tensor::Tensor;

/// Gradients produced by one backward pass: one tensor per parameter (same
/// order as [`Layer::params`]) and the gradient with respect to the input.
#[derive(Debug, Clone)]
pub struct LayerGrads {
    pub params: Vec<Tensor>,
    pub input: Tensor,
}

pub trait Layer {
    fn name(&self) -> &'static str;

    /// Inference forward pass; leaves no cache behind.
    fn forward(&self, x: &Tensor) -> Result<Tensor>;

    /// Forward pass that records the state needed by [`Layer::backward`].
    fn forward_train(&mut self, x: &Tensor) -> Result<Tensor>;

    /// Backpropagates `upstream` (gradient w.r.t. this layer's output) through
    /// the most recent cached forward pass, consuming the cache.
    fn backward(&mut self, upstream: &Tensor) -> Result<LayerGrads>;

    fn params(&self) -> Vec<&Tensor> {
        Vec::new()
    }

    fn params_mut(&mut self) -> Vec<&mut Tensor> {
        Vec::new()
    }
}

/// Glorot-uniform initialisation: samples in ±√(6 / (fan_in + fan_out)).
pub fn glorot_uniform<R: Rng + ?Sized>(
    shape: &[usize],
    fan_in: usize,
    fan_out: usize,
    rng: &mut R,
) -> Tensor {
    let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
    let n: usize = shape.iter().product();
    let data = (0..n).map(|_| rng.random_range(-limit..=limit)).collect();
    Tensor::new(shape.to_vec(), data).expect("shape product matches generated length")
}

pub(crate) fn expect_shape(
    op: &'static str,
    t: &Tensor,
    expected: &[usize],
) -> Result<()> {
    if t.shape() == expected {
        Ok(())
    } else {
        Err(crate::Error::Dimension {
            op,
            left: t.shape().to_vec(),
            right: expected.to_vec(),
        })
    }
}
