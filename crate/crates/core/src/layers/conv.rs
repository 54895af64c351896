use rand::Rng;

use super::{expect_shape, glorot_uniform, Layer, LayerGrads};
use crate::error::{Error, Result};
use crate::tensor::{ensure_finite, Tensor};

/// Weights `[out_channels, in_channels, kernel_size]` and bias `[out_channels]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Conv1DParams {
    pub weights: Tensor,
    pub bias: Tensor,
}

impl Conv1DParams {
    pub fn new(weights: Tensor, bias: Tensor) -> Result<Self> {
        if weights.rank() != 3 {
            return Err(Error::InvalidTensor(format!(
                "conv1d weights must be rank 3, got {:?}",
                weights.shape()
            )));
        }
        expect_shape("conv1d", &bias, &[weights.shape()[0]])?;
        Ok(Self { weights, bias })
    }

    pub fn init<R: Rng + ?Sized>(
        in_channels: usize,
        out_channels: usize,
        kernel_size: usize,
        rng: &mut R,
    ) -> Self {
        let weights = glorot_uniform(
            &[out_channels, in_channels, kernel_size],
            in_channels * kernel_size,
            out_channels * kernel_size,
            rng,
        );
        Self {
            weights,
            bias: Tensor::zeros(&[out_channels]),
        }
    }

    pub fn out_channels(&self) -> usize {
        self.weights.shape()[0]
    }

    pub fn in_channels(&self) -> usize {
        self.weights.shape()[1]
    }

    pub fn kernel_size(&self) -> usize {
        self.weights.shape()[2]
    }
}

/// Valid 1-D convolution with stride 1 over a `[T, C_in]` sequence:
/// `out[t, o] = b[o] + Σ_{c,j} x[t+j, c] · w[o, c, j]`.
pub fn conv1d_forward(x: &Tensor, p: &Conv1DParams) -> Result<Tensor> {
    let (c_out, c_in, k) = (p.out_channels(), p.in_channels(), p.kernel_size());
    if x.rank() != 2 || x.shape()[1] != c_in {
        return Err(Error::Dimension {
            op: "conv1d",
            left: x.shape().to_vec(),
            right: p.weights.shape().to_vec(),
        });
    }
    let t_in = x.shape()[0];
    if t_in < k {
        return Err(Error::SequenceTooShort {
            layer: "conv1d",
            len: t_in,
            required: k,
        });
    }
    let t_out = t_in - k + 1;
    let (xd, w, b) = (x.data(), p.weights.data(), p.bias.data());
    let mut out = vec![0.0; t_out * c_out];
    for t in 0..t_out {
        // the k input rows under the kernel are contiguous in row-major storage
        let patch = &xd[t * c_in..(t + k) * c_in];
        for o in 0..c_out {
            let wo = &w[o * c_in * k..(o + 1) * c_in * k];
            let mut acc = b[o];
            for j in 0..k {
                let xrow = &patch[j * c_in..(j + 1) * c_in];
                for c in 0..c_in {
                    acc += xrow[c] * wo[c * k + j];
                }
            }
            out[t * c_out + o] = acc;
        }
    }
    ensure_finite("conv1d", &out)?;
    Tensor::new(vec![t_out, c_out], out)
}

#[derive(Debug, Clone)]
pub struct Conv1d {
    pub params: Conv1DParams,
    cache: Option<Tensor>,
}

impl Conv1d {
    pub fn new(params: Conv1DParams) -> Self {
        Self {
            params,
            cache: None,
        }
    }
}

impl Layer for Conv1d {
    fn name(&self) -> &'static str {
        "conv1d"
    }

    fn forward(&self, x: &Tensor) -> Result<Tensor> {
        conv1d_forward(x, &self.params)
    }

    fn forward_train(&mut self, x: &Tensor) -> Result<Tensor> {
        let out = conv1d_forward(x, &self.params)?;
        self.cache = Some(x.clone());
        Ok(out)
    }

    fn backward(&mut self, upstream: &Tensor) -> Result<LayerGrads> {
        let x = self
            .cache
            .take()
            .ok_or(Error::MissingCache { layer: "conv1d" })?;
        let p = &self.params;
        let (c_out, c_in, k) = (p.out_channels(), p.in_channels(), p.kernel_size());
        let t_in = x.shape()[0];
        let t_out = t_in - k + 1;
        expect_shape("conv1d backward", upstream, &[t_out, c_out])?;

        let (xd, w, g) = (x.data(), p.weights.data(), upstream.data());
        let mut dw = vec![0.0; c_out * c_in * k];
        let mut db = vec![0.0; c_out];
        let mut dx = vec![0.0; t_in * c_in];
        for t in 0..t_out {
            for o in 0..c_out {
                let go = g[t * c_out + o];
                if go == 0.0 {
                    continue;
                }
                db[o] += go;
                for j in 0..k {
                    let row = (t + j) * c_in;
                    for c in 0..c_in {
                        let wi = o * c_in * k + c * k + j;
                        dw[wi] += go * xd[row + c];
                        dx[row + c] += go * w[wi];
                    }
                }
            }
        }
        Ok(LayerGrads {
            params: vec![
                Tensor::new(vec![c_out, c_in, k], dw)?,
                Tensor::new(vec![c_out], db)?,
            ],
            input: Tensor::new(vec![t_in, c_in], dx)?,
        })
    }

    fn params(&self) -> Vec<&Tensor> {
        vec![&self.params.weights, &self.params.bias]
    }

    fn params_mut(&mut self) -> Vec<&mut Tensor> {
        vec![&mut self.params.weights, &mut self.params.bias]
    }
}
