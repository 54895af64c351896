//! LSTM layer with backpropagation through time.
//!
//! Gate equations for one step (⊙ is the elementwise product):
//!
//! ```text
//! f = σ(W_f x + U_f h + b_f)      forget
//! i = σ(W_i x + U_i h + b_i)      input
//! g = tanh(W_g x + U_g h + b_g)   candidate
//! o = σ(W_o x + U_o h + b_o)      output
//! c' = f ⊙ c + i ⊙ g
//! h' = o ⊙ tanh(c')
//! ```

use rand::Rng;

use super::{expect_shape, glorot_uniform, Layer, LayerGrads};
use crate::error::{Error, Result};
use crate::tensor::{ensure_finite, matvec_acc, matvec_t_acc, outer_acc, sigmoid, Tensor};

const FORGET: usize = 0;
const INPUT: usize = 1;
const CANDIDATE: usize = 2;
const OUTPUT: usize = 3;

/// Parameters of one gate: input weights `[H, F]`, recurrent weights `[H, H]`, bias `[H]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GateParams {
    pub input_weights: Tensor,
    pub recurrent_weights: Tensor,
    pub bias: Tensor,
}

/// Gates in the order forget, input, candidate, output.
#[derive(Debug, Clone, PartialEq)]
pub struct LSTMParams {
    pub gates: [GateParams; 4],
}

impl LSTMParams {
    pub fn new(gates: [GateParams; 4]) -> Result<Self> {
        let w = &gates[0].input_weights;
        if w.rank() != 2 {
            return Err(Error::InvalidTensor(format!(
                "lstm input weights must be rank 2, got {:?}",
                w.shape()
            )));
        }
        let (h, f) = (w.shape()[0], w.shape()[1]);
        for g in &gates {
            expect_shape("lstm params", &g.input_weights, &[h, f])?;
            expect_shape("lstm params", &g.recurrent_weights, &[h, h])?;
            expect_shape("lstm params", &g.bias, &[h])?;
        }
        Ok(Self { gates })
    }

    pub fn zeros(features: usize, hidden: usize) -> Self {
        let gate = || GateParams {
            input_weights: Tensor::zeros(&[hidden, features]),
            recurrent_weights: Tensor::zeros(&[hidden, hidden]),
            bias: Tensor::zeros(&[hidden]),
        };
        Self {
            gates: [gate(), gate(), gate(), gate()],
        }
    }

    /// Glorot-uniform weights per gate matrix, zero biases.
    pub fn init<R: Rng + ?Sized>(features: usize, hidden: usize, rng: &mut R) -> Self {
        let mut gate = || GateParams {
            input_weights: glorot_uniform(&[hidden, features], features, hidden, rng),
            recurrent_weights: glorot_uniform(&[hidden, hidden], hidden, hidden, rng),
            bias: Tensor::zeros(&[hidden]),
        };
        Self {
            gates: [gate(), gate(), gate(), gate()],
        }
    }

    pub fn hidden(&self) -> usize {
        self.gates[0].bias.len()
    }

    pub fn features(&self) -> usize {
        self.gates[0].input_weights.shape()[1]
    }
}

/// Activated gate values for one step.
#[derive(Debug, Clone)]
struct StepState {
    x: Vec<f64>,
    h_prev: Vec<f64>,
    c_prev: Vec<f64>,
    gates: [Vec<f64>; 4],
    tanh_c: Vec<f64>,
}

fn step_raw(x: &[f64], h_prev: &[f64], c_prev: &[f64], p: &LSTMParams) -> (Vec<f64>, Vec<f64>, StepState) {
    let hidden = p.hidden();
    let gates: [Vec<f64>; 4] = std::array::from_fn(|k| {
        let gp = &p.gates[k];
        let mut pre = gp.bias.data().to_vec();
        matvec_acc(gp.input_weights.data(), x, &mut pre);
        matvec_acc(gp.recurrent_weights.data(), h_prev, &mut pre);
        if k == CANDIDATE {
            pre.iter_mut().for_each(|v| *v = v.tanh());
        } else {
            pre.iter_mut().for_each(|v| *v = sigmoid(*v));
        }
        pre
    });
    let mut c = vec![0.0; hidden];
    let mut h = vec![0.0; hidden];
    let mut tanh_c = vec![0.0; hidden];
    for j in 0..hidden {
        c[j] = gates[FORGET][j] * c_prev[j] + gates[INPUT][j] * gates[CANDIDATE][j];
        tanh_c[j] = c[j].tanh();
        h[j] = gates[OUTPUT][j] * tanh_c[j];
    }
    let state = StepState {
        x: x.to_vec(),
        h_prev: h_prev.to_vec(),
        c_prev: c_prev.to_vec(),
        gates,
        tanh_c,
    };
    (h, c, state)
}

/// One LSTM step. Returns `(h_t, c_t)`.
pub fn lstm_step(x: &Tensor, h_prev: &Tensor, c_prev: &Tensor, p: &LSTMParams) -> Result<(Tensor, Tensor)> {
    let (hd, f) = (p.hidden(), p.features());
    expect_shape("lstm_step", x, &[f])?;
    expect_shape("lstm_step", h_prev, &[hd])?;
    expect_shape("lstm_step", c_prev, &[hd])?;
    let (h, c, _) = step_raw(x.data(), h_prev.data(), c_prev.data(), p);
    ensure_finite("lstm_step", &h)?;
    ensure_finite("lstm_step", &c)?;
    Ok((Tensor::vector(h), Tensor::vector(c)))
}

fn run_sequence(seq: &Tensor, p: &LSTMParams, keep_states: bool) -> Result<(Vec<Vec<f64>>, Vec<StepState>)> {
    if seq.rank() != 2 || seq.shape()[1] != p.features() {
        return Err(Error::Dimension {
            op: "lstm",
            left: seq.shape().to_vec(),
            right: vec![seq.shape()[0], p.features()],
        });
    }
    let hidden = p.hidden();
    let mut h = vec![0.0; hidden];
    let mut c = vec![0.0; hidden];
    let mut outputs = Vec::with_capacity(seq.shape()[0]);
    let mut states = Vec::new();
    for t in 0..seq.shape()[0] {
        let (h_next, c_next, state) = step_raw(seq.row(t), &h, &c, p);
        if keep_states {
            states.push(state);
        }
        outputs.push(h_next.clone());
        h = h_next;
        c = c_next;
    }
    Ok((outputs, states))
}

fn collect_output(outputs: Vec<Vec<f64>>, hidden: usize, full_sequence: bool) -> Result<Tensor> {
    let out = if full_sequence {
        let l = outputs.len();
        Tensor::new(vec![l, hidden], outputs.concat())?
    } else {
        Tensor::vector(outputs.into_iter().last().expect("non-empty sequence"))
    };
    ensure_finite("lstm", out.data())?;
    Ok(out)
}

/// Runs the cell over `seq: [L, F]` from zero initial state. Returns every
/// hidden state `[L, H]` when `full_sequence` is set, otherwise the last `[H]`.
pub fn lstm_forward(seq: &Tensor, p: &LSTMParams, full_sequence: bool) -> Result<Tensor> {
    if seq.rank() == 2 && seq.shape()[0] == 0 {
        return Err(Error::EmptySequence { layer: "lstm" });
    }
    let (outputs, _) = run_sequence(seq, p, false)?;
    collect_output(outputs, p.hidden(), full_sequence)
}

#[derive(Debug, Clone)]
pub struct Lstm {
    pub params: LSTMParams,
    pub full_sequence: bool,
    cache: Option<Vec<StepState>>,
}

impl Lstm {
    pub fn new(params: LSTMParams, full_sequence: bool) -> Self {
        Self {
            params,
            full_sequence,
            cache: None,
        }
    }
}

impl Layer for Lstm {
    fn name(&self) -> &'static str {
        "lstm"
    }

    fn forward(&self, x: &Tensor) -> Result<Tensor> {
        lstm_forward(x, &self.params, self.full_sequence)
    }

    fn forward_train(&mut self, x: &Tensor) -> Result<Tensor> {
        let (outputs, states) = run_sequence(x, &self.params, true)?;
        let out = collect_output(outputs, self.params.hidden(), self.full_sequence)?;
        self.cache = Some(states);
        Ok(out)
    }

    fn backward(&mut self, upstream: &Tensor) -> Result<LayerGrads> {
        let states = self.cache.take().ok_or(Error::MissingCache { layer: "lstm" })?;
        let p = &self.params;
        let (hidden, features, steps) = (p.hidden(), p.features(), states.len());
        if self.full_sequence {
            expect_shape("lstm backward", upstream, &[steps, hidden])?;
        } else {
            expect_shape("lstm backward", upstream, &[hidden])?;
        }

        let mut dw: [Vec<f64>; 4] = std::array::from_fn(|_| vec![0.0; hidden * features]);
        let mut du: [Vec<f64>; 4] = std::array::from_fn(|_| vec![0.0; hidden * hidden]);
        let mut db: [Vec<f64>; 4] = std::array::from_fn(|_| vec![0.0; hidden]);
        let mut dx = vec![0.0; steps * features];
        let mut dh_next = vec![0.0; hidden];
        let mut dc_next = vec![0.0; hidden];
        let mut dpre: [Vec<f64>; 4] = std::array::from_fn(|_| vec![0.0; hidden]);

        for t in (0..steps).rev() {
            let s = &states[t];
            let [f, i, g, o] = &s.gates;
            for j in 0..hidden {
                let mut dh = dh_next[j];
                if self.full_sequence {
                    dh += upstream.data()[t * hidden + j];
                } else if t == steps - 1 {
                    dh += upstream.data()[j];
                }
                let d_o = dh * s.tanh_c[j];
                let dc = dc_next[j] + dh * o[j] * (1.0 - s.tanh_c[j] * s.tanh_c[j]);
                let d_f = dc * s.c_prev[j];
                let d_i = dc * g[j];
                let d_g = dc * i[j];
                dc_next[j] = dc * f[j];
                dpre[FORGET][j] = d_f * f[j] * (1.0 - f[j]);
                dpre[INPUT][j] = d_i * i[j] * (1.0 - i[j]);
                dpre[CANDIDATE][j] = d_g * (1.0 - g[j] * g[j]);
                dpre[OUTPUT][j] = d_o * o[j] * (1.0 - o[j]);
            }
            dh_next.iter_mut().for_each(|v| *v = 0.0);
            let dx_t = &mut dx[t * features..(t + 1) * features];
            for k in 0..4 {
                let gp = &p.gates[k];
                outer_acc(&dpre[k], &s.x, &mut dw[k]);
                outer_acc(&dpre[k], &s.h_prev, &mut du[k]);
                db[k].iter_mut().zip(&dpre[k]).for_each(|(b, d)| *b += d);
                matvec_t_acc(gp.input_weights.data(), &dpre[k], dx_t);
                matvec_t_acc(gp.recurrent_weights.data(), &dpre[k], &mut dh_next);
            }
        }

        let mut params = Vec::with_capacity(12);
        for k in 0..4 {
            params.push(Tensor::new(vec![hidden, features], std::mem::take(&mut dw[k]))?);
            params.push(Tensor::new(vec![hidden, hidden], std::mem::take(&mut du[k]))?);
            params.push(Tensor::new(vec![hidden], std::mem::take(&mut db[k]))?);
        }
        Ok(LayerGrads {
            params,
            input: Tensor::new(vec![steps, features], dx)?,
        })
    }

    /// Per gate (forget, input, candidate, output): input weights, recurrent weights, bias.
    fn params(&self) -> Vec<&Tensor> {
        self.params
            .gates
            .iter()
            .flat_map(|g| [&g.input_weights, &g.recurrent_weights, &g.bias])
            .collect()
    }

    fn params_mut(&mut self) -> Vec<&mut Tensor> {
        self.params
            .gates
            .iter_mut()
            .flat_map(|g| [&mut g.input_weights, &mut g.recurrent_weights, &mut g.bias])
            .collect()
    }
}
