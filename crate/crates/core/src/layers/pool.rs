use super::{expect_shape, Layer, LayerGrads};
use crate::error::{Error, Result};
use crate::tensor::{argmax_first, Tensor};

/// Non-overlapping max pooling over time (window = stride = `width`) on a
/// `[T, C]` sequence. Returns the pooled `[⌊T/width⌋, C]` tensor and, for each
/// output element, the input row that supplied the maximum. Trailing rows that
/// do not fill a window are dropped; ties go to the earlier row.
pub fn maxpool1d_forward(x: &Tensor, width: usize) -> Result<(Tensor, Vec<usize>)> {
    if x.rank() != 2 {
        return Err(Error::Dimension {
            op: "maxpool1d",
            left: x.shape().to_vec(),
            right: vec![0, 0],
        });
    }
    let (t_in, c) = (x.shape()[0], x.shape()[1]);
    if width == 0 || t_in < width {
        return Err(Error::SequenceTooShort {
            layer: "maxpool1d",
            len: t_in,
            required: width.max(1),
        });
    }
    let t_out = t_in / width;
    let xd = x.data();
    let mut out = Vec::with_capacity(t_out * c);
    let mut argmax = Vec::with_capacity(t_out * c);
    for t in 0..t_out {
        for ch in 0..c {
            let lane = (0..width).map(|j| xd[(t * width + j) * c + ch]);
            let (j, v) = argmax_first(lane).expect("width >= 1");
            out.push(v);
            argmax.push(t * width + j);
        }
    }
    Ok((Tensor::new(vec![t_out, c], out)?, argmax))
}

#[derive(Debug, Clone)]
pub struct MaxPool1d {
    pub width: usize,
    cache: Option<(Vec<usize>, Vec<usize>)>,
}

impl MaxPool1d {
    pub fn new(width: usize) -> Self {
        Self { width, cache: None }
    }
}

impl Layer for MaxPool1d {
    fn name(&self) -> &'static str {
        "maxpool1d"
    }

    fn forward(&self, x: &Tensor) -> Result<Tensor> {
        maxpool1d_forward(x, self.width).map(|(t, _)| t)
    }

    fn forward_train(&mut self, x: &Tensor) -> Result<Tensor> {
        let (out, argmax) = maxpool1d_forward(x, self.width)?;
        self.cache = Some((x.shape().to_vec(), argmax));
        Ok(out)
    }

    fn backward(&mut self, upstream: &Tensor) -> Result<LayerGrads> {
        let (in_shape, argmax) = self
            .cache
            .take()
            .ok_or(Error::MissingCache { layer: "maxpool1d" })?;
        let c = in_shape[1];
        expect_shape("maxpool1d backward", upstream, &[in_shape[0] / self.width, c])?;
        let mut dx = Tensor::zeros(&in_shape);
        let dxd = dx.data_mut();
        for (i, (&row, &g)) in argmax.iter().zip(upstream.data()).enumerate() {
            dxd[row * c + i % c] += g;
        }
        Ok(LayerGrads {
            params: Vec::new(),
            input: dx,
        })
    }
}
