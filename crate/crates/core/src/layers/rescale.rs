use super::{Layer, LayerGrads};
use crate::data::FeatureRange;
use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Maps a normalized prediction back to physical units: `y · (max − min) + min`.
/// Defined for any finite `y`, not only `[0, 1]`.
pub fn rescale(y_norm: f64, range: &FeatureRange) -> Result<f64> {
    range.check_degenerate("target")?;
    let y = y_norm * (range.max - range.min) + range.min;
    if y.is_finite() {
        Ok(y)
    } else {
        Err(Error::Numeric { op: "rescale" })
    }
}

/// Output layer wrapping [`rescale`]; it has no trainable parameters.
#[derive(Debug, Clone)]
pub struct Rescale {
    pub range: FeatureRange,
}

impl Rescale {
    pub fn new(range: FeatureRange) -> Result<Self> {
        range.check_degenerate("target")?;
        Ok(Self { range })
    }

    fn span(&self) -> f64 {
        self.range.max - self.range.min
    }
}

impl Layer for Rescale {
    fn name(&self) -> &'static str {
        "rescale"
    }

    fn forward(&self, x: &Tensor) -> Result<Tensor> {
        let data = x
            .data()
            .iter()
            .map(|&v| rescale(v, &self.range))
            .collect::<Result<Vec<_>>>()?;
        Tensor::new(x.shape().to_vec(), data)
    }

    fn forward_train(&mut self, x: &Tensor) -> Result<Tensor> {
        self.forward(x)
    }

    fn backward(&mut self, upstream: &Tensor) -> Result<LayerGrads> {
        Ok(LayerGrads {
            params: Vec::new(),
            input: upstream.scale(self.span())?,
        })
    }
}
