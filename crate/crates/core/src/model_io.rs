//! Binary model file.
//!
//! All integers and floats are little-endian.
//!
//! ```text
//! header   "AFM1"  magic (4 bytes)
//!          u16     format version (1)
//!          u64     payload length in bytes
//! payload  9 × u32 model config: conv_filters, kernel_size, pool_width, lstm1_units,
//!                  lstm2_units, dense1_units, dense2_units, lookback, features
//!          u32     feature count, then per feature:
//!                  u32 name length, UTF-8 name, f64 min, f64 max
//!          u32     layer count, then per layer:
//!                  u32 tensor count, then per tensor:
//!                  u32 rank, rank × u32 dims, f64 × Π dims values (row-major)
//! trailer  u32     CRC-32 (IEEE) of the payload bytes
//! ```

use std::fs;
use std::path::Path;

use crate::data::{FeatureRange, NormalizationStats};
use crate::error::{Error, Result};
use crate::layers::{Conv1DParams, DenseParams, GateParams, LSTMParams};
use crate::model::{Model, ModelConfig};
use crate::tensor::Tensor;

pub const MAGIC: &[u8; 4] = b"AFM1";
pub const FORMAT_VERSION: u16 = 1;
pub const HEADER_LEN: usize = 4 + 2 + 8;
const TRAILER_LEN: usize = 4;

fn put_u32(buf: &mut Vec<u8>, v: usize) {
    buf.extend_from_slice(&(v as u32).to_le_bytes());
}

pub fn encode_model(model: &Model) -> Vec<u8> {
    let mut payload = Vec::new();
    let c = &model.config;
    for v in [
        c.conv_filters,
        c.kernel_size,
        c.pool_width,
        c.lstm1_units,
        c.lstm2_units,
        c.dense1_units,
        c.dense2_units,
        c.lookback,
        c.features,
    ] {
        put_u32(&mut payload, v);
    }
    put_u32(&mut payload, model.stats.len());
    for (name, r) in model.stats.names.iter().zip(&model.stats.ranges) {
        put_u32(&mut payload, name.len());
        payload.extend_from_slice(name.as_bytes());
        payload.extend_from_slice(&r.min.to_le_bytes());
        payload.extend_from_slice(&r.max.to_le_bytes());
    }
    let layers = model.layer_params();
    put_u32(&mut payload, layers.len());
    for tensors in layers {
        put_u32(&mut payload, tensors.len());
        for t in tensors {
            put_u32(&mut payload, t.rank());
            for &d in t.shape() {
                put_u32(&mut payload, d);
            }
            for v in t.data() {
                payload.extend_from_slice(&v.to_le_bytes());
            }
        }
    }

    let mut out = Vec::with_capacity(HEADER_LEN + payload.len() + TRAILER_LEN);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(payload.len() as u64).to_le_bytes());
    out.extend_from_slice(&payload);
    out.extend_from_slice(&crc32fast::hash(&payload).to_le_bytes());
    out
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.buf.len())
            .ok_or_else(|| Error::Format("payload ends early".into()))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<usize> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()) as usize)
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn tensor(&mut self) -> Result<Tensor> {
        let rank = self.u32()?;
        if rank > 8 {
            return Err(Error::Format(format!("implausible tensor rank {rank}")));
        }
        let shape = (0..rank).map(|_| self.u32()).collect::<Result<Vec<_>>>()?;
        let n = shape.iter().try_fold(1usize, |acc, &d| acc.checked_mul(d));
        let n = n.filter(|&n| n.saturating_mul(8) <= self.buf.len() - self.pos).ok_or_else(|| {
            Error::Format(format!("tensor of shape {shape:?} exceeds payload"))
        })?;
        let data = (0..n).map(|_| self.f64()).collect::<Result<Vec<_>>>()?;
        Tensor::new(shape, data).map_err(|e| Error::Format(e.to_string()))
    }
}

pub fn decode_model(bytes: &[u8]) -> Result<Model> {
    if bytes.len() < HEADER_LEN {
        return Err(Error::Truncated {
            expected: HEADER_LEN,
            found: bytes.len(),
        });
    }
    if &bytes[..4] != MAGIC {
        return Err(Error::BadMagic);
    }
    let version = u16::from_le_bytes([bytes[4], bytes[5]]);
    if version != FORMAT_VERSION {
        return Err(Error::VersionMismatch {
            found: version,
            expected: FORMAT_VERSION,
        });
    }
    let payload_len = u64::from_le_bytes(bytes[6..14].try_into().unwrap());
    let expected = usize::try_from(payload_len)
        .ok()
        .and_then(|p| p.checked_add(HEADER_LEN + TRAILER_LEN))
        .ok_or_else(|| Error::Format(format!("implausible payload length {payload_len}")))?;
    if bytes.len() < expected {
        return Err(Error::Truncated {
            expected,
            found: bytes.len(),
        });
    }
    if bytes.len() > expected {
        return Err(Error::Format(format!(
            "{} trailing bytes after checksum",
            bytes.len() - expected
        )));
    }
    let payload = &bytes[HEADER_LEN..expected - TRAILER_LEN];
    let stored = u32::from_le_bytes(bytes[expected - TRAILER_LEN..].try_into().unwrap());
    let computed = crc32fast::hash(payload);
    if stored != computed {
        return Err(Error::Checksum { stored, computed });
    }

    let mut cur = Cursor { buf: payload, pos: 0 };
    let mut cfg_fields = [0usize; 9];
    for f in &mut cfg_fields {
        *f = cur.u32()?;
    }
    let [conv_filters, kernel_size, pool_width, lstm1_units, lstm2_units, dense1_units, dense2_units, lookback, features] =
        cfg_fields;
    let config = ModelConfig {
        conv_filters,
        kernel_size,
        pool_width,
        lstm1_units,
        lstm2_units,
        dense1_units,
        dense2_units,
        lookback,
        features,
    };
    config.validate().map_err(|e| Error::Format(e.to_string()))?;

    let n_features = cur.u32()?;
    let mut names = Vec::with_capacity(n_features.min(4096));
    let mut ranges = Vec::with_capacity(n_features.min(4096));
    for _ in 0..n_features {
        let len = cur.u32()?;
        let name = std::str::from_utf8(cur.take(len)?)
            .map_err(|_| Error::Format("feature name is not UTF-8".into()))?
            .to_string();
        names.push(name);
        ranges.push(FeatureRange {
            min: cur.f64()?,
            max: cur.f64()?,
        });
    }
    let stats = NormalizationStats::new(names, ranges).map_err(|e| Error::Format(e.to_string()))?;
    if stats.len() != config.features {
        return Err(Error::Format(format!(
            "config has {} features, stats have {}",
            config.features,
            stats.len()
        )));
    }

    let expected_shapes = config.layer_shapes();
    let n_layers = cur.u32()?;
    if n_layers != expected_shapes.len() {
        return Err(Error::Format(format!(
            "expected {} layers, found {n_layers}",
            expected_shapes.len()
        )));
    }
    let mut layers: Vec<Vec<Tensor>> = Vec::with_capacity(n_layers);
    for shapes in &expected_shapes {
        let count = cur.u32()?;
        if count != shapes.len() {
            return Err(Error::Format(format!(
                "layer {} has {count} tensors, expected {}",
                layers.len(),
                shapes.len()
            )));
        }
        let mut tensors = Vec::with_capacity(count);
        for shape in shapes {
            let t = cur.tensor()?;
            if t.shape() != shape.as_slice() {
                return Err(Error::Format(format!(
                    "tensor shape {:?} does not match config ({shape:?})",
                    t.shape()
                )));
            }
            tensors.push(t);
        }
        layers.push(tensors);
    }
    if cur.pos != payload.len() {
        return Err(Error::Format("unused bytes at end of payload".into()));
    }

    let mut it = layers.into_iter();
    let mut next = || it.next().expect("layer count checked");
    let conv = pair(next());
    let conv = Conv1DParams::new(conv.0, conv.1)?;
    let lstm1 = lstm_params(next())?;
    let lstm2 = lstm_params(next())?;
    let d1 = pair(next());
    let d2 = pair(next());
    let head = pair(next());
    Ok(Model::from_parts(
        config,
        stats,
        conv,
        [lstm1, lstm2],
        [
            DenseParams::new(d1.0, d1.1)?,
            DenseParams::new(d2.0, d2.1)?,
            DenseParams::new(head.0, head.1)?,
        ],
    ))
}

fn pair(mut v: Vec<Tensor>) -> (Tensor, Tensor) {
    let b = v.pop().expect("two tensors");
    let w = v.pop().expect("two tensors");
    (w, b)
}

fn lstm_params(v: Vec<Tensor>) -> Result<LSTMParams> {
    let mut it = v.into_iter();
    let gates: [GateParams; 4] = std::array::from_fn(|_| GateParams {
        input_weights: it.next().expect("12 tensors"),
        recurrent_weights: it.next().expect("12 tensors"),
        bias: it.next().expect("12 tensors"),
    });
    LSTMParams::new(gates)
}

pub fn save_model(model: &Model, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_model(model)).map_err(|e| Error::io(path, e))
}

pub fn load_model(path: impl AsRef<Path>) -> Result<Model> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_model(&bytes)
}
