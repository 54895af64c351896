//! Run configuration: defaults, overridden by a `key = value` file, overridden by flags.

use std::fs;
use std::path::Path;
use std::str::FromStr;

use crate::data::{PreprocessOptions, SplitRatios};
use crate::error::{Error, Result};
use crate::eval::{DEFAULT_BIN_WIDTH, DEFAULT_MAX_BINS};
use crate::model::ModelConfig;
use crate::train::TrainConfig;

/// Every recognised key, in the spelling used by both the config file and
/// the command-line flags.
pub const CONFIG_KEYS: &[(&str, &str)] = &[
    ("conv-filters", "Conv1D filter count"),
    ("kernel-size", "Conv1D kernel width"),
    ("pool-width", "max-pool width"),
    ("lstm1-units", "first LSTM hidden size"),
    ("lstm2-units", "second LSTM hidden size"),
    ("dense1-units", "first dense layer width"),
    ("dense2-units", "second dense layer width"),
    ("lookback", "input windows per sample"),
    ("epochs", "training epochs"),
    ("batch", "mini-batch size"),
    ("lr", "learning rate"),
    ("optimizer", "adam or sgd"),
    ("beta1", "Adam first-moment decay"),
    ("beta2", "Adam second-moment decay"),
    ("epsilon", "Adam epsilon"),
    ("clip", "global gradient norm clip (0 disables)"),
    ("seed", "random seed"),
    ("split", "train,validation,test ratios"),
    ("coverage", "minimum valid hours per 6-hour window"),
    ("weather-top-k", "one-hot encode this many weather tokens"),
    ("bins", "histogram bin width in µg/m³"),
    ("max-bins", "histogram bin cap"),
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunConfig {
    /// `features` is filled in from the data at training time.
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub split: SplitRatios,
    pub preprocess: PreprocessOptions,
    pub bin_width: f64,
    pub max_bins: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            model: ModelConfig::new(0),
            train: TrainConfig::default(),
            split: SplitRatios::default(),
            preprocess: PreprocessOptions::default(),
            bin_width: DEFAULT_BIN_WIDTH,
            max_bins: DEFAULT_MAX_BINS,
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .trim()
        .parse()
        .map_err(|_| Error::Config(format!("invalid value `{value}` for `{key}`")))
}

impl RunConfig {
    /// Sets one key. Unknown keys are an error.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let m = &mut self.model;
        let t = &mut self.train;
        match key {
            "conv-filters" => m.conv_filters = parse(key, value)?,
            "kernel-size" => m.kernel_size = parse(key, value)?,
            "pool-width" => m.pool_width = parse(key, value)?,
            "lstm1-units" => m.lstm1_units = parse(key, value)?,
            "lstm2-units" => m.lstm2_units = parse(key, value)?,
            "dense1-units" => m.dense1_units = parse(key, value)?,
            "dense2-units" => m.dense2_units = parse(key, value)?,
            "lookback" => m.lookback = parse(key, value)?,
            "epochs" => t.epochs = parse(key, value)?,
            "batch" => t.batch_size = parse(key, value)?,
            "lr" => t.optimizer.learning_rate = parse(key, value)?,
            "optimizer" => t.optimizer.kind = value.trim().parse()?,
            "beta1" => t.optimizer.beta1 = parse(key, value)?,
            "beta2" => t.optimizer.beta2 = parse(key, value)?,
            "epsilon" => t.optimizer.epsilon = parse(key, value)?,
            "clip" => t.clip_norm = parse(key, value)?,
            "seed" => t.seed = parse(key, value)?,
            "split" => {
                let parts = value.split(',').map(|p| parse::<f64>(key, p)).collect::<Result<Vec<_>>>()?;
                let [train, validation, test] = parts[..] else {
                    return Err(Error::Config(format!("`split` needs three ratios, got `{value}`")));
                };
                self.split = SplitRatios { train, validation, test };
            }
            "coverage" => self.preprocess.coverage = parse(key, value)?,
            "weather-top-k" => self.preprocess.weather_top_k = parse(key, value)?,
            "bins" => self.bin_width = parse(key, value)?,
            "max-bins" => self.max_bins = parse(key, value)?,
            _ => return Err(Error::Config(format!("unknown configuration key `{key}`"))),
        }
        Ok(())
    }

    /// Applies a `key = value` file. Blank lines and `#` comments are ignored.
    pub fn apply_str(&mut self, text: &str) -> Result<()> {
        for (n, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`", n + 1)))?;
            self.set(key.trim(), value.trim())
                .map_err(|e| Error::Config(format!("line {}: {e}", n + 1)))?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        self.apply_str(&text)
    }

    /// Checks everything that does not depend on the data.
    pub fn validate(&self) -> Result<()> {
        self.train.validate()?;
        self.split.validate()?;
        let probe = ModelConfig { features: 1, ..self.model };
        probe.validate()?;
        if !(1..=6).contains(&self.preprocess.coverage) {
            return Err(Error::Config(format!(
                "coverage must be between 1 and 6, got {}",
                self.preprocess.coverage
            )));
        }
        if !(self.bin_width.is_finite() && self.bin_width > 0.0) {
            return Err(Error::Config(format!("bin width must be positive, got {}", self.bin_width)));
        }
        if self.max_bins == 0 {
            return Err(Error::Config("max-bins must be at least 1".into()));
        }
        Ok(())
    }
}
