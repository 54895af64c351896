use rand::Rng;

use super::{expect_shape, glorot_uniform, Layer, LayerGrads};
use crate::error::{Error, Result};
use crate::tensor::{ensure_finite, matvec_acc, matvec_t_acc, outer_acc, Tensor};

/// Weights `[out, in]` and bias `[out]`.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseParams {
    pub weights: Tensor,
    pub bias: Tensor,
}

impl DenseParams {
    pub fn new(weights: Tensor, bias: Tensor) -> Result<Self> {
        if weights.rank() != 2 {
            return Err(Error::InvalidTensor(format!(
                "dense weights must be rank 2, got {:?}",
                weights.shape()
            )));
        }
        expect_shape("dense params", &bias, &[weights.shape()[0]])?;
        Ok(Self { weights, bias })
    }

    pub fn init<R: Rng + ?Sized>(inputs: usize, outputs: usize, rng: &mut R) -> Self {
        Self {
            weights: glorot_uniform(&[outputs, inputs], inputs, outputs, rng),
            bias: Tensor::zeros(&[outputs]),
        }
    }

    pub fn inputs(&self) -> usize {
        self.weights.shape()[1]
    }

    pub fn outputs(&self) -> usize {
        self.weights.shape()[0]
    }
}

/// `W x + b`; activation is applied by a separate layer.
pub fn dense_forward(x: &Tensor, p: &DenseParams) -> Result<Tensor> {
    expect_shape("dense", x, &[p.inputs()])?;
    let mut out = p.bias.data().to_vec();
    matvec_acc(p.weights.data(), x.data(), &mut out);
    ensure_finite("dense", &out)?;
    Ok(Tensor::vector(out))
}

#[derive(Debug, Clone)]
pub struct Dense {
    pub params: DenseParams,
    cache: Option<Tensor>,
}

impl Dense {
    pub fn new(params: DenseParams) -> Self {
        Self {
            params,
            cache: None,
        }
    }
}

impl Layer for Dense {
    fn name(&self) -> &'static str {
        "dense"
    }

    fn forward(&self, x: &Tensor) -> Result<Tensor> {
        dense_forward(x, &self.params)
    }

    fn forward_train(&mut self, x: &Tensor) -> Result<Tensor> {
        let out = dense_forward(x, &self.params)?;
        self.cache = Some(x.clone());
        Ok(out)
    }

    fn backward(&mut self, upstream: &Tensor) -> Result<LayerGrads> {
        let x = self.cache.take().ok_or(Error::MissingCache { layer: "dense" })?;
        let (n_in, n_out) = (self.params.inputs(), self.params.outputs());
        expect_shape("dense backward", upstream, &[n_out])?;
        let mut dw = vec![0.0; n_out * n_in];
        outer_acc(upstream.data(), x.data(), &mut dw);
        let mut dx = vec![0.0; n_in];
        matvec_t_acc(self.params.weights.data(), upstream.data(), &mut dx);
        Ok(LayerGrads {
            params: vec![Tensor::new(vec![n_out, n_in], dw)?, upstream.clone()],
            input: Tensor::vector(dx),
        })
    }

    fn params(&self) -> Vec<&Tensor> {
        vec![&self.params.weights, &self.params.bias]
    }

    fn params_mut(&mut self) -> Vec<&mut Tensor> {
        vec![&mut self.params.weights, &mut self.params.bias]
    }
}
