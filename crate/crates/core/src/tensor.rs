//! Dense row-major tensor of `f64` and the kernels the layers are built from.
//!
//! Every public operation checks its result for non-finite values and fails
//! with [`Error::Numeric`] naming the operation instead of propagating NaN.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

/// Pointwise nonlinearities with their analytic derivatives.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Sigmoid,
    Tanh,
    Relu,
}

impl Activation {
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Sigmoid => sigmoid(x),
            Activation::Tanh => x.tanh(),
            Activation::Relu => x.max(0.0),
        }
    }

    /// Derivative at pre-activation `x`. ReLU uses 0 at the kink.
    pub fn derivative(self, x: f64) -> f64 {
        match self {
            Activation::Sigmoid => {
                let s = sigmoid(x);
                s * (1.0 - s)
            }
            Activation::Tanh => {
                let t = x.tanh();
                1.0 - t * t
            }
            Activation::Relu => {
                if x > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    fn name(self) -> &'static str {
        match self {
            Activation::Sigmoid => "sigmoid",
            Activation::Tanh => "tanh",
            Activation::Relu => "relu",
        }
    }
}

/// Numerically stable logistic function.
#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub(crate) fn ensure_finite(op: &'static str, data: &[f64]) -> Result<()> {
    if data.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::Numeric { op })
    }
}

/// Index of the first maximum; ties resolve toward the lower index.
pub(crate) fn argmax_first(values: impl IntoIterator<Item = f64>) -> Option<(usize, f64)> {
    let mut best: Option<(usize, f64)> = None;
    for (i, v) in values.into_iter().enumerate() {
        match best {
            Some((_, b)) if v <= b => {}
            _ => best = Some((i, v)),
        }
    }
    best
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        if shape.contains(&0) {
            return Err(Error::InvalidTensor(format!(
                "shape {shape:?} has a zero dimension"
            )));
        }
        let expected: usize = shape.iter().product();
        if expected != data.len() {
            return Err(Error::InvalidTensor(format!(
                "shape {shape:?} needs {expected} elements, got {}",
                data.len()
            )));
        }
        Ok(Self { shape, data })
    }

    pub fn zeros(shape: &[usize]) -> Self {
        let n = shape.iter().product();
        Self {
            shape: shape.to_vec(),
            data: vec![0.0; n],
        }
    }

    pub fn filled(shape: &[usize], value: f64) -> Self {
        let n = shape.iter().product();
        Self {
            shape: shape.to_vec(),
            data: vec![value; n],
        }
    }

    /// 1-D tensor from a vector. Panics on an empty vector.
    pub fn vector(data: Vec<f64>) -> Self {
        assert!(!data.is_empty(), "Tensor::vector requires at least one element");
        Self {
            shape: vec![data.len()],
            data,
        }
    }

    /// 2-D tensor from a slice of equal-length rows.
    pub fn matrix(rows: &[Vec<f64>]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|row| row.len() != c) {
            return Err(Error::InvalidTensor("ragged matrix rows".into()));
        }
        Self::new(vec![r, c], rows.concat())
    }

    pub fn eye(n: usize) -> Self {
        let mut t = Self::zeros(&[n, n]);
        for i in 0..n {
            t.data[i * n + i] = 1.0;
        }
        t
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn rank(&self) -> usize {
        self.shape.len()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    /// Row `i` of a rank-2 tensor.
    pub fn row(&self, i: usize) -> &[f64] {
        let cols = self.shape[1];
        &self.data[i * cols..(i + 1) * cols]
    }

    pub fn reshape(self, shape: Vec<usize>) -> Result<Self> {
        Self::new(shape, self.data)
    }

    fn same_shape(&self, other: &Tensor, op: &'static str) -> Result<()> {
        if self.shape == other.shape {
            Ok(())
        } else {
            Err(Error::Dimension {
                op,
                left: self.shape.clone(),
                right: other.shape.clone(),
            })
        }
    }

    fn finish(op: &'static str, shape: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        ensure_finite(op, &data)?;
        Ok(Self { shape, data })
    }

    pub fn matmul(&self, other: &Tensor) -> Result<Tensor> {
        if self.rank() != 2 || other.rank() != 2 || self.shape[1] != other.shape[0] {
            return Err(Error::Dimension {
                op: "matmul",
                left: self.shape.clone(),
                right: other.shape.clone(),
            });
        }
        let (m, k, n) = (self.shape[0], self.shape[1], other.shape[1]);
        let mut out = vec![0.0; m * n];
        for i in 0..m {
            let out_row = &mut out[i * n..(i + 1) * n];
            for p in 0..k {
                let a = self.data[i * k + p];
                if a == 0.0 {
                    continue;
                }
                let b_row = &other.data[p * n..(p + 1) * n];
                for (o, &b) in out_row.iter_mut().zip(b_row) {
                    *o += a * b;
                }
            }
        }
        Self::finish("matmul", vec![m, n], out)
    }

    fn zip_with(&self, other: &Tensor, op: &'static str, f: impl Fn(f64, f64) -> f64) -> Result<Tensor> {
        self.same_shape(other, op)?;
        let data = self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect();
        Self::finish(op, self.shape.clone(), data)
    }

    pub fn add(&self, other: &Tensor) -> Result<Tensor> {
        self.zip_with(other, "add", |a, b| a + b)
    }

    pub fn sub(&self, other: &Tensor) -> Result<Tensor> {
        self.zip_with(other, "sub", |a, b| a - b)
    }

    pub fn mul(&self, other: &Tensor) -> Result<Tensor> {
        self.zip_with(other, "mul", |a, b| a * b)
    }

    pub fn scale(&self, factor: f64) -> Result<Tensor> {
        let data = self.data.iter().map(|&a| a * factor).collect();
        Self::finish("scale", self.shape.clone(), data)
    }

    pub fn activate(&self, act: Activation) -> Result<Tensor> {
        let data = self.data.iter().map(|&a| act.apply(a)).collect();
        Self::finish(act.name(), self.shape.clone(), data)
    }

    pub fn sigmoid(&self) -> Result<Tensor> {
        self.activate(Activation::Sigmoid)
    }

    pub fn tanh(&self) -> Result<Tensor> {
        self.activate(Activation::Tanh)
    }

    pub fn relu(&self) -> Result<Tensor> {
        self.activate(Activation::Relu)
    }

    /// Generic axis reduction: visits each lane along `axis` and folds it with `f`.
    fn reduce_lanes<T>(
        &self,
        op: &'static str,
        axis: usize,
        mut f: impl FnMut(&mut dyn Iterator<Item = f64>) -> T,
    ) -> Result<(Vec<usize>, Vec<T>)> {
        if axis >= self.rank() {
            return Err(Error::Axis {
                op,
                axis,
                rank: self.rank(),
            });
        }
        let outer: usize = self.shape[..axis].iter().product();
        let len = self.shape[axis];
        let inner: usize = self.shape[axis + 1..].iter().product();
        let mut out = Vec::with_capacity(outer * inner);
        for o in 0..outer {
            for i in 0..inner {
                let base = o * len * inner + i;
                let mut lane = (0..len).map(|j| self.data[base + j * inner]);
                out.push(f(&mut lane));
            }
        }
        let mut shape = self.shape.clone();
        shape.remove(axis);
        Ok((shape, out))
    }

    pub fn sum(&self, axis: usize) -> Result<Tensor> {
        let (shape, data) = self.reduce_lanes("sum", axis, |lane| lane.sum::<f64>())?;
        Self::finish("sum", shape, data)
    }

    pub fn mean(&self, axis: usize) -> Result<Tensor> {
        let n = self.shape.get(axis).copied().unwrap_or(1) as f64;
        let (shape, data) = self.reduce_lanes("mean", axis, |lane| lane.sum::<f64>() / n)?;
        Self::finish("mean", shape, data)
    }

    /// Maximum along `axis` plus the position of the maximum within each lane
    /// (first occurrence on ties).
    pub fn max_with_index(&self, axis: usize) -> Result<(Tensor, Vec<usize>)> {
        let (shape, pairs) = self.reduce_lanes("max_with_index", axis, |lane| {
            argmax_first(lane).expect("lanes are non-empty")
        })?;
        let (idx, data): (Vec<usize>, Vec<f64>) = pairs.into_iter().unzip();
        Ok((Self::finish("max_with_index", shape, data)?, idx))
    }

    pub fn sum_all(&self) -> f64 {
        self.data.iter().sum()
    }

    pub fn l2_norm_sq(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum()
    }
}

/// `out += W x` for `W` of shape `[rows, cols]` stored row-major.
#[inline]
pub(crate) fn matvec_acc(w: &[f64], x: &[f64], out: &mut [f64]) {
    let cols = x.len();
    for (o, row) in out.iter_mut().zip(w.chunks_exact(cols)) {
        *o += row.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
    }
}

/// `out += Wᵀ g` for `W` of shape `[rows, cols]`, `g` of length `rows`.
#[inline]
pub(crate) fn matvec_t_acc(w: &[f64], g: &[f64], out: &mut [f64]) {
    let cols = out.len();
    for (&gi, row) in g.iter().zip(w.chunks_exact(cols)) {
        if gi == 0.0 {
            continue;
        }
        for (o, &a) in out.iter_mut().zip(row) {
            *o += gi * a;
        }
    }
}

/// `dw += g xᵀ` (outer product accumulate), `dw` of shape `[g.len(), x.len()]`.
#[inline]
pub(crate) fn outer_acc(g: &[f64], x: &[f64], dw: &mut [f64]) {
    let cols = x.len();
    for (&gi, row) in g.iter().zip(dw.chunks_exact_mut(cols)) {
        if gi == 0.0 {
            continue;
        }
        for (d, &xv) in row.iter_mut().zip(x) {
            *d += gi * xv;
        }
    }
}
