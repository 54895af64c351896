//! The CNN-LSTM stack:
//!
//! ```text
//! [L, F] → Conv1D(k) → ReLU → MaxPool(p) → LSTM(full sequence) → LSTM(last state)
//!        → Dense → ReLU → Dense → ReLU → Dense(1) → rescale
//! ```
//!
//! The head output before rescaling is on the normalized target scale; that
//! is what the loss sees. [`Model::predict`] applies the rescale layer.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::data::NormalizationStats;
use crate::error::{Error, Result};
use crate::layers::{
    rescale, Conv1DParams, Conv1d, Dense, DenseParams, LSTMParams, Layer, Lstm, MaxPool1d, Relu,
};
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ModelConfig {
    pub conv_filters: usize,
    pub kernel_size: usize,
    pub pool_width: usize,
    pub lstm1_units: usize,
    pub lstm2_units: usize,
    pub dense1_units: usize,
    pub dense2_units: usize,
    pub lookback: usize,
    pub features: usize,
}

impl ModelConfig {
    pub fn new(features: usize) -> Self {
        Self {
            conv_filters: 64,
            kernel_size: 3,
            pool_width: 2,
            lstm1_units: 64,
            lstm2_units: 60,
            dense1_units: 30,
            dense2_units: 10,
            lookback: 8,
            features,
        }
    }

    /// Time steps reaching the first LSTM: `⌊(L − k + 1) / p⌋`.
    pub fn pooled_steps(&self) -> usize {
        if self.lookback < self.kernel_size || self.pool_width == 0 {
            return 0;
        }
        (self.lookback - self.kernel_size + 1) / self.pool_width
    }

    /// Parameter shapes per layer, in [`Model::layer_params`] order.
    pub fn layer_shapes(&self) -> Vec<Vec<Vec<usize>>> {
        let lstm = |f: usize, h: usize| -> Vec<Vec<usize>> {
            (0..4).flat_map(|_| [vec![h, f], vec![h, h], vec![h]]).collect()
        };
        let dense = |i: usize, o: usize| vec![vec![o, i], vec![o]];
        vec![
            vec![vec![self.conv_filters, self.features, self.kernel_size], vec![self.conv_filters]],
            lstm(self.conv_filters, self.lstm1_units),
            lstm(self.lstm1_units, self.lstm2_units),
            dense(self.lstm2_units, self.dense1_units),
            dense(self.dense1_units, self.dense2_units),
            dense(self.dense2_units, 1),
        ]
    }

    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("conv_filters", self.conv_filters),
            ("kernel_size", self.kernel_size),
            ("pool_width", self.pool_width),
            ("lstm1_units", self.lstm1_units),
            ("lstm2_units", self.lstm2_units),
            ("dense1_units", self.dense1_units),
            ("dense2_units", self.dense2_units),
            ("lookback", self.lookback),
            ("features", self.features),
        ];
        if let Some((name, _)) = fields.iter().find(|(_, v)| *v == 0) {
            return Err(Error::Config(format!("{name} must be positive")));
        }
        if self.pooled_steps() < 1 {
            return Err(Error::Config(format!(
                "lookback {} with kernel {} and pool width {} leaves no time steps: \
                 ({} - {} + 1) / {} < 1",
                self.lookback,
                self.kernel_size,
                self.pool_width,
                self.lookback,
                self.kernel_size,
                self.pool_width
            )));
        }
        Ok(())
    }
}

/// Per-parameter gradients in [`Model::params`] order plus the input gradient.
#[derive(Debug, Clone)]
pub struct ModelGrads {
    pub params: Vec<Tensor>,
    pub input: Tensor,
}

#[derive(Debug, Clone)]
pub struct Model {
    pub config: ModelConfig,
    pub stats: NormalizationStats,
    pub conv: Conv1d,
    conv_relu: Relu,
    pool: MaxPool1d,
    pub lstm1: Lstm,
    pub lstm2: Lstm,
    pub dense1: Dense,
    dense1_relu: Relu,
    pub dense2: Dense,
    dense2_relu: Relu,
    pub head: Dense,
}

impl Model {
    /// Builds the stack with Glorot-uniform weights drawn from a ChaCha8
    /// stream seeded with `seed`; biases start at zero.
    pub fn build(config: ModelConfig, stats: NormalizationStats, seed: u64) -> Result<Self> {
        config.validate()?;
        if stats.len() != config.features {
            return Err(Error::Config(format!(
                "model expects {} features but normalization stats have {}",
                config.features,
                stats.len()
            )));
        }
        stats.target_range()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let c = &config;
        let conv = Conv1DParams::init(c.features, c.conv_filters, c.kernel_size, &mut rng);
        let lstm1 = LSTMParams::init(c.conv_filters, c.lstm1_units, &mut rng);
        let lstm2 = LSTMParams::init(c.lstm1_units, c.lstm2_units, &mut rng);
        let dense1 = DenseParams::init(c.lstm2_units, c.dense1_units, &mut rng);
        let dense2 = DenseParams::init(c.dense1_units, c.dense2_units, &mut rng);
        let head = DenseParams::init(c.dense2_units, 1, &mut rng);
        Ok(Self::from_parts(config, stats, conv, [lstm1, lstm2], [dense1, dense2, head]))
    }

    pub(crate) fn from_parts(
        config: ModelConfig,
        stats: NormalizationStats,
        conv: Conv1DParams,
        [lstm1, lstm2]: [LSTMParams; 2],
        [dense1, dense2, head]: [DenseParams; 3],
    ) -> Self {
        Self {
            config,
            stats,
            conv: Conv1d::new(conv),
            conv_relu: Relu::new(),
            pool: MaxPool1d::new(config.pool_width),
            lstm1: Lstm::new(lstm1, true),
            lstm2: Lstm::new(lstm2, false),
            dense1: Dense::new(dense1),
            dense1_relu: Relu::new(),
            dense2: Dense::new(dense2),
            dense2_relu: Relu::new(),
            head: Dense::new(head),
        }
    }

    fn check_input(&self, x: &Tensor) -> Result<()> {
        let expected = [self.config.lookback, self.config.features];
        if x.shape() != expected {
            return Err(Error::Dimension {
                op: "model forward",
                left: x.shape().to_vec(),
                right: expected.to_vec(),
            });
        }
        Ok(())
    }

    /// Head output on the normalized target scale.
    pub fn predict_normalized(&self, x: &Tensor) -> Result<f64> {
        self.check_input(x)?;
        let mut h = self.conv.forward(x)?;
        h = self.conv_relu.forward(&h)?;
        h = self.pool.forward(&h)?;
        h = self.lstm1.forward(&h)?;
        h = self.lstm2.forward(&h)?;
        h = self.dense1.forward(&h)?;
        h = self.dense1_relu.forward(&h)?;
        h = self.dense2.forward(&h)?;
        h = self.dense2_relu.forward(&h)?;
        Ok(self.head.forward(&h)?.data()[0])
    }

    /// Prediction in physical units (µg/m³).
    pub fn predict(&self, x: &Tensor) -> Result<f64> {
        rescale(self.predict_normalized(x)?, &self.stats.target_range()?)
    }

    /// Training forward pass; caches activations for [`Model::backward`].
    pub fn forward_train(&mut self, x: &Tensor) -> Result<f64> {
        self.check_input(x)?;
        let mut h = self.conv.forward_train(x)?;
        h = self.conv_relu.forward_train(&h)?;
        h = self.pool.forward_train(&h)?;
        h = self.lstm1.forward_train(&h)?;
        h = self.lstm2.forward_train(&h)?;
        h = self.dense1.forward_train(&h)?;
        h = self.dense1_relu.forward_train(&h)?;
        h = self.dense2.forward_train(&h)?;
        h = self.dense2_relu.forward_train(&h)?;
        Ok(self.head.forward_train(&h)?.data()[0])
    }

    /// Backpropagates d(loss)/d(normalized prediction) through the cached pass.
    pub fn backward(&mut self, d_pred: f64) -> Result<ModelGrads> {
        let g_head = self.head.backward(&Tensor::vector(vec![d_pred]))?;
        let g = self.dense2_relu.backward(&g_head.input)?;
        let g_d2 = self.dense2.backward(&g.input)?;
        let g = self.dense1_relu.backward(&g_d2.input)?;
        let g_d1 = self.dense1.backward(&g.input)?;
        let g_l2 = self.lstm2.backward(&g_d1.input)?;
        let g_l1 = self.lstm1.backward(&g_l2.input)?;
        let g = self.pool.backward(&g_l1.input)?;
        let g = self.conv_relu.backward(&g.input)?;
        let g_conv = self.conv.backward(&g.input)?;

        let mut params = g_conv.params;
        for part in [g_l1, g_l2, g_d1, g_d2, g_head] {
            params.extend(part.params);
        }
        Ok(ModelGrads {
            params,
            input: g_conv.input,
        })
    }

    /// Trainable tensors grouped by layer: conv, lstm1, lstm2, dense1, dense2, head.
    pub fn layer_params(&self) -> Vec<Vec<&Tensor>> {
        vec![
            self.conv.params(),
            self.lstm1.params(),
            self.lstm2.params(),
            self.dense1.params(),
            self.dense2.params(),
            self.head.params(),
        ]
    }

    pub fn params(&self) -> Vec<&Tensor> {
        self.layer_params().into_iter().flatten().collect()
    }

    pub fn params_mut(&mut self) -> Vec<&mut Tensor> {
        let mut out = self.conv.params_mut();
        out.extend(self.lstm1.params_mut());
        out.extend(self.lstm2.params_mut());
        out.extend(self.dense1.params_mut());
        out.extend(self.dense2.params_mut());
        out.extend(self.head.params_mut());
        out
    }

    pub fn param_count(&self) -> usize {
        self.params().iter().map(|t| t.len()).sum()
    }

    /// CRC-32 over every parameter's little-endian bytes, in parameter order.
    pub fn params_checksum(&self) -> u32 {
        let mut h = crc32fast::Hasher::new();
        for t in self.params() {
            for v in t.data() {
                h.update(&v.to_le_bytes());
            }
        }
        h.finalize()
    }
}
