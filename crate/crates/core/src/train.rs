//! Mini-batch training on MSE with global-norm clipping.

use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::data::SampleSet;
use crate::error::{Error, Result};
use crate::model::Model;
use crate::optim::{clip_global_norm, Optimizer, OptimizerConfig};
use crate::tensor::Tensor;

pub const DEFAULT_EPOCHS: usize = 50;
pub const DEFAULT_BATCH_SIZE: usize = 32;
pub const DEFAULT_CLIP_NORM: f64 = 5.0;
pub const DEFAULT_SEED: u64 = 42;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub optimizer: OptimizerConfig,
    /// Global L2 gradient norm threshold; 0 disables clipping.
    pub clip_norm: f64,
    /// Seeds the per-epoch shuffle.
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: DEFAULT_EPOCHS,
            batch_size: DEFAULT_BATCH_SIZE,
            optimizer: OptimizerConfig::default(),
            clip_norm: DEFAULT_CLIP_NORM,
            seed: DEFAULT_SEED,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be at least 1".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch size must be at least 1".into()));
        }
        if !(self.clip_norm.is_finite() && self.clip_norm >= 0.0) {
            return Err(Error::Config(format!("clip norm must be >= 0, got {}", self.clip_norm)));
        }
        self.optimizer.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochLoss {
    /// 1-based.
    pub epoch: usize,
    pub train_loss: f64,
    /// `None` when the validation split is empty.
    pub val_loss: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct TrainReport {
    pub epochs: Vec<EpochLoss>,
    pub wall_time: Duration,
    pub params_checksum: u32,
}

impl TrainReport {
    pub fn final_epoch(&self) -> Option<&EpochLoss> {
        self.epochs.last()
    }
}

/// Squared error of one prediction and its derivative w.r.t. the prediction.
pub fn mse_loss(pred: f64, target: f64) -> (f64, f64) {
    let d = pred - target;
    (d * d, 2.0 * d)
}

/// Mean squared error of the model over `set` on the normalized scale.
pub fn evaluate_loss(model: &Model, set: &SampleSet) -> Result<Option<f64>> {
    if set.is_empty() {
        return Ok(None);
    }
    let mut total = 0.0;
    for (x, &t) in set.inputs.iter().zip(&set.targets) {
        total += mse_loss(model.predict_normalized(x)?, t).0;
    }
    Ok(Some(total / set.len() as f64))
}

fn diverged(err: Error, epoch: usize, batch: usize) -> Error {
    match err {
        Error::Numeric { .. } => Error::Divergence { epoch, batch },
        other => other,
    }
}

/// One optimizer step over the samples at `idx`. Returns the batch mean loss.
fn train_batch(
    model: &mut Model,
    opt: &mut Optimizer,
    set: &SampleSet,
    idx: &[usize],
    clip_norm: f64,
) -> Result<f64> {
    let scale = 1.0 / idx.len() as f64;
    let mut grads: Vec<Tensor> = model.params().iter().map(|p| Tensor::zeros(p.shape())).collect();
    let mut loss = 0.0;
    for &i in idx {
        let pred = model.forward_train(&set.inputs[i])?;
        let (l, d) = mse_loss(pred, set.targets[i]);
        loss += l;
        let g = model.backward(d * scale)?;
        for (acc, gi) in grads.iter_mut().zip(&g.params) {
            for (a, &v) in acc.data_mut().iter_mut().zip(gi.data()) {
                *a += v;
            }
        }
    }
    let loss = loss * scale;
    if !loss.is_finite() {
        return Err(Error::Numeric { op: "loss" });
    }
    clip_global_norm(&mut grads, clip_norm);
    opt.step(&mut model.params_mut(), &grads)?;
    Ok(loss)
}

/// Trains `model` in place. Training samples are reshuffled every epoch
/// from a stream derived from `cfg.seed`; the last partial batch is kept.
/// A non-finite loss, gradient or activation stops training with
/// [`Error::Divergence`].
pub fn train(model: &mut Model, train_set: &SampleSet, val_set: &SampleSet, cfg: &TrainConfig) -> Result<TrainReport> {
    cfg.validate()?;
    if train_set.is_empty() {
        return Err(Error::TooFewSamples { n: 0 });
    }
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    // keep the shuffle stream apart from the one used for weight init
    rng.set_stream(1);
    let mut opt = Optimizer::new(cfg.optimizer);
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut epochs = Vec::with_capacity(cfg.epochs);

    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        let mut weighted = 0.0;
        for (b, idx) in order.chunks(cfg.batch_size).enumerate() {
            let loss = train_batch(model, &mut opt, train_set, idx, cfg.clip_norm)
                .map_err(|e| diverged(e, epoch, b + 1))?;
            weighted += loss * idx.len() as f64;
        }
        let train_loss = weighted / train_set.len() as f64;
        let val_loss = evaluate_loss(model, val_set).map_err(|e| diverged(e, epoch, 0))?;
        match val_loss {
            Some(v) => log::info!("epoch {epoch}/{}: train {train_loss:.6}, val {v:.6}", cfg.epochs),
            None => log::info!("epoch {epoch}/{}: train {train_loss:.6}", cfg.epochs),
        }
        epochs.push(EpochLoss {
            epoch,
            train_loss,
            val_loss,
        });
    }
    Ok(TrainReport {
        epochs,
        wall_time: started.elapsed(),
        params_checksum: model.params_checksum(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{FeatureRange, NormalizationStats};
    use crate::model::ModelConfig;
    use chrono::NaiveDate;

    fn tiny_model(seed: u64) -> Model {
        let cfg = ModelConfig {
            conv_filters: 4,
            kernel_size: 3,
            pool_width: 2,
            lstm1_units: 4,
            lstm2_units: 4,
            dense1_units: 4,
            dense2_units: 3,
            lookback: 6,
            features: 1,
        };
        let stats = NormalizationStats::new(vec!["pm25".into()], vec![FeatureRange { min: 0.0, max: 1.0 }]).unwrap();
        Model::build(cfg, stats, seed).unwrap()
    }

    fn ramp_set(n: usize) -> SampleSet {
        let t0 = NaiveDate::from_ymd_opt(2013, 1, 1).unwrap().and_hms_opt(0, 0, 0).unwrap();
        let mut s = SampleSet::default();
        for i in 0..n {
            let level = (i % 5) as f64 / 5.0;
            s.inputs.push(Tensor::filled(&[6, 1], level));
            s.targets.push(level);
            s.timestamps.push(t0);
            s.target_pm25.push(level);
            s.last_pm25.push(level);
        }
        s
    }

    #[test]
    fn mse_gradient_matches_finite_difference() {
        let (p, t) = (0.37, -1.2);
        let h = 1e-6;
        let num = (mse_loss(p + h, t).0 - mse_loss(p - h, t).0) / (2.0 * h);
        let ana = mse_loss(p, t).1;
        assert!((num - ana).abs() / ana.abs() < 1e-8);
    }

    #[test]
    fn same_seed_same_weights() {
        let data = ramp_set(40);
        let cfg = TrainConfig {
            epochs: 3,
            batch_size: 7,
            ..TrainConfig::default()
        };
        let mut a = tiny_model(1);
        let mut b = tiny_model(1);
        let ra = train(&mut a, &data, &data, &cfg).unwrap();
        let rb = train(&mut b, &data, &data, &cfg).unwrap();
        assert_eq!(ra.params_checksum, rb.params_checksum);
        assert_eq!(ra.epochs, rb.epochs);
    }

    #[test]
    fn loss_decreases_on_learnable_data() {
        let data = ramp_set(50);
        let cfg = TrainConfig {
            epochs: 40,
            batch_size: 10,
            optimizer: OptimizerConfig {
                learning_rate: 5e-3,
                ..OptimizerConfig::default()
            },
            ..TrainConfig::default()
        };
        let mut m = tiny_model(3);
        let r = train(&mut m, &data, &SampleSet::default(), &cfg).unwrap();
        let first = r.epochs[0].train_loss;
        let last = r.final_epoch().unwrap().train_loss;
        assert!(last < 0.5 * first, "{first} -> {last}");
        assert_eq!(r.epochs[0].val_loss, None);
    }

    #[test]
    fn huge_learning_rate_diverges_with_location() {
        let mut data = ramp_set(8);
        data.targets.iter_mut().for_each(|t| *t = 1e300);
        let cfg = TrainConfig {
            epochs: 2,
            batch_size: 4,
            clip_norm: 0.0,
            ..TrainConfig::default()
        };
        let mut m = tiny_model(0);
        let err = train(&mut m, &data, &data, &cfg).unwrap_err();
        assert!(matches!(err, Error::Divergence { epoch: 1, batch: 1 }), "{err}");
        assert_eq!(err.exit_code(), 3);
    }

    #[test]
    fn rejects_zero_batch() {
        let cfg = TrainConfig {
            batch_size: 0,
            ..TrainConfig::default()
        };
        let mut m = tiny_model(0);
        assert!(matches!(train(&mut m, &ramp_set(4), &ramp_set(0), &cfg), Err(Error::Config(_))));
    }
}
