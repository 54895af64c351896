use super::{expect_shape, Layer, LayerGrads};
use crate::error::{Error, Result};
use crate::tensor::{Activation, Tensor};

/// Elementwise ReLU over a tensor of any shape.
#[derive(Debug, Clone, Default)]
pub struct Relu {
    cache: Option<Tensor>,
}

impl Relu {
    pub fn new() -> Self {
        Self::default()
    }
}

impl Layer for Relu {
    fn name(&self) -> &'static str {
        "relu"
    }

    fn forward(&self, x: &Tensor) -> Result<Tensor> {
        x.relu()
    }

    fn forward_train(&mut self, x: &Tensor) -> Result<Tensor> {
        let out = x.relu()?;
        self.cache = Some(x.clone());
        Ok(out)
    }

    fn backward(&mut self, upstream: &Tensor) -> Result<LayerGrads> {
        let x = self.cache.take().ok_or(Error::MissingCache { layer: "relu" })?;
        expect_shape("relu backward", upstream, x.shape())?;
        let data = x
            .data()
            .iter()
            .zip(upstream.data())
            .map(|(&xi, &g)| g * Activation::Relu.derivative(xi))
            .collect();
        Ok(LayerGrads {
            params: Vec::new(),
            input: Tensor::new(x.shape().to_vec(), data)?,
        })
    }
}
