//! From-scratch CNN-LSTM forecaster for the six-hour mean PM2.5 concentration.
//!
//! The pipeline runs raw hourly CSV → six-hour windows ([`data`]) → a
//! Conv1D / max-pool / two-layer LSTM / dense stack ([`model`]) trained with
//! Adam on MSE ([`train`]) and scored against a persistence baseline ([`eval`]).

pub mod cli;
pub mod data;
pub mod error;
pub mod eval;
pub mod layers;
pub mod model;
pub mod model_io;
pub mod optim;
pub mod synthetic;
pub mod tensor;
pub mod train;

pub use error::{Error, Result};
pub use model::{Model, ModelConfig};
pub use tensor::Tensor;
