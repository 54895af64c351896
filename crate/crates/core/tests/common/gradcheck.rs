//! Central finite-difference gradient checks.

use aeroforecast::data::{FeatureRange, NormalizationStats};
use aeroforecast::layers::{Conv1DParams, Conv1d, Dense, DenseParams, LSTMParams, Layer, Lstm, MaxPool1d, Relu, Rescale};
use aeroforecast::{Model, ModelConfig, Result, Tensor};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const STEP: f64 = 1e-5;
pub const TOLERANCE: f64 = 1e-4;
/// Denominator floor so that two gradients that are both ~0 compare equal
/// instead of dividing roundoff by roundoff.
const FLOOR: f64 = 1e-6;

pub fn rel_err(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(FLOOR)
}

#[derive(Debug, Clone, Default)]
pub struct Outcome {
    pub checked: usize,
    pub worst: f64,
    pub worst_at: String,
}

impl Outcome {
    fn record(&mut self, analytic: f64, numeric: f64, at: impl FnOnce() -> String) {
        self.checked += 1;
        let e = rel_err(analytic, numeric);
        if e > self.worst || self.checked == 1 {
            self.worst = e;
            self.worst_at = at();
        }
    }

    pub fn merge(&mut self, other: Outcome) {
        self.checked += other.checked;
        if other.worst > self.worst {
            self.worst = other.worst;
            self.worst_at = other.worst_at;
        }
    }

    pub fn passed(&self) -> bool {
        self.checked > 0 && self.worst < TOLERANCE
    }
}

pub fn random_tensor(shape: &[usize], rng: &mut impl Rng) -> Tensor {
    let n = shape.iter().product();
    Tensor::new(shape.to_vec(), (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
}

fn dot(a: &Tensor, b: &Tensor) -> f64 {
    a.data().iter().zip(b.data()).map(|(x, y)| x * y).sum()
}

fn central<F: FnMut(f64) -> Result<f64>>(value: f64, mut f: F) -> Result<f64> {
    Ok((f(value + STEP)? - f(value - STEP)?) / (2.0 * STEP))
}

/// Checks every parameter and input gradient of `layer` for the scalar
/// loss `Σ w ⊙ layer(x)` with a random weighting `w`.
pub fn check_layer<L: Layer>(layer: &mut L, x: &Tensor, rng: &mut impl Rng) -> Result<Outcome> {
    let w = random_tensor(layer.forward(x)?.shape(), rng);
    layer.forward_train(x)?;
    let grads = layer.backward(&w)?;
    let mut out = Outcome::default();
    let name = layer.name();

    for p in 0..grads.params.len() {
        for j in 0..grads.params[p].len() {
            let original = layer.params()[p].data()[j];
            let numeric = central(original, |v| {
                layer.params_mut()[p].data_mut()[j] = v;
                Ok(dot(&w, &layer.forward(x)?))
            })?;
            layer.params_mut()[p].data_mut()[j] = original;
            out.record(grads.params[p].data()[j], numeric, || format!("{name} param {p}[{j}]"));
        }
    }
    let mut xp = x.clone();
    for j in 0..x.len() {
        let numeric = central(x.data()[j], |v| {
            xp.data_mut()[j] = v;
            Ok(dot(&w, &layer.forward(&xp)?))
        })?;
        xp.data_mut()[j] = x.data()[j];
        out.record(grads.input.data()[j], numeric, || format!("{name} input[{j}]"));
    }
    Ok(out)
}

/// Checks the whole model for the squared-error loss against `target`.
pub fn check_model(model: &mut Model, x: &Tensor, target: f64) -> Result<Outcome> {
    let pred = model.forward_train(x)?;
    let grads = model.backward(2.0 * (pred - target))?;
    let loss = |m: &Model, x: &Tensor| -> Result<f64> {
        let d = m.predict_normalized(x)? - target;
        Ok(d * d)
    };
    let mut out = Outcome::default();
    for p in 0..grads.params.len() {
        for j in 0..grads.params[p].len() {
            let original = model.params()[p].data()[j];
            let numeric = central(original, |v| {
                model.params_mut()[p].data_mut()[j] = v;
                loss(model, x)
            })?;
            model.params_mut()[p].data_mut()[j] = original;
            out.record(grads.params[p].data()[j], numeric, || format!("model param {p}[{j}]"));
        }
    }
    let mut xp = x.clone();
    for j in 0..x.len() {
        let numeric = central(x.data()[j], |v| {
            xp.data_mut()[j] = v;
            loss(model, &xp)
        })?;
        xp.data_mut()[j] = x.data()[j];
        out.record(grads.input.data()[j], numeric, || format!("model input[{j}]"));
    }
    Ok(out)
}

/// The default stack with every width shrunk to 3.
pub fn shrunken_model(seed: u64) -> Model {
    let cfg = ModelConfig {
        conv_filters: 3,
        kernel_size: 3,
        pool_width: 2,
        lstm1_units: 3,
        lstm2_units: 3,
        dense1_units: 3,
        dense2_units: 3,
        lookback: 8,
        features: 4,
    };
    let names = ["pm25", "dewp", "temp", "pres"].map(String::from).to_vec();
    let ranges = vec![FeatureRange { min: 0.0, max: 500.0 }; 4];
    Model::build(cfg, NormalizationStats::new(names, ranges).unwrap(), seed).unwrap()
}

/// Every layer kind plus the shrunken model, for one seed.
pub fn check_all(seed: u64) -> Result<Vec<(&'static str, Outcome)>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut results = Vec::new();

    let mut conv = Conv1d::new(Conv1DParams::init(3, 4, 3, &mut rng));
    let x = random_tensor(&[7, 3], &mut rng);
    results.push(("conv1d", check_layer(&mut conv, &x, &mut rng)?));

    let mut pool = MaxPool1d::new(2);
    let x = random_tensor(&[7, 3], &mut rng);
    results.push(("maxpool1d", check_layer(&mut pool, &x, &mut rng)?));

    let mut relu = Relu::new();
    let x = random_tensor(&[5, 3], &mut rng);
    results.push(("relu", check_layer(&mut relu, &x, &mut rng)?));

    let mut lstm_seq = Lstm::new(LSTMParams::init(3, 4, &mut rng), true);
    let x = random_tensor(&[5, 3], &mut rng);
    results.push(("lstm (sequence)", check_layer(&mut lstm_seq, &x, &mut rng)?));

    let mut lstm_last = Lstm::new(LSTMParams::init(3, 4, &mut rng), false);
    let x = random_tensor(&[5, 3], &mut rng);
    results.push(("lstm (last state)", check_layer(&mut lstm_last, &x, &mut rng)?));

    let mut dense = Dense::new(DenseParams::init(4, 3, &mut rng));
    let x = random_tensor(&[4], &mut rng);
    results.push(("dense", check_layer(&mut dense, &x, &mut rng)?));

    let mut rescale = Rescale::new(FeatureRange { min: 3.0, max: 994.0 }).unwrap();
    let x = random_tensor(&[1], &mut rng);
    results.push(("rescale", check_layer(&mut rescale, &x, &mut rng)?));

    let mut model = shrunken_model(seed);
    // zero biases put dead ReLU units exactly on the kink at 0, where the
    // central difference sees half a slope; check at a generic point instead
    for p in model.params_mut().into_iter().filter(|p| p.rank() == 1) {
        p.data_mut().iter_mut().for_each(|b| *b = rng.random_range(-0.5..0.5));
    }
    let x = random_tensor(&[8, 4], &mut rng);
    let target = rng.random_range(0.0..1.0);
    results.push(("full model", check_model(&mut model, &x, target)?));
    Ok(results)
}
