//! Helpers shared by the integration test targets.
#![allow(dead_code)]

pub mod gradcheck;
pub mod oracles;

use std::path::{Path, PathBuf};

pub fn data_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data")
}

pub fn beijing_fixture() -> PathBuf {
    data_dir().join("beijing_like_6mo.csv")
}

pub fn sine_fixture() -> PathBuf {
    data_dir().join("sine_2000h.csv")
}
