//! Test-set metrics, the persistence baseline and CSV exports.

use std::fmt;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use chrono::NaiveDateTime;

use crate::data::{SampleSet, TIMESTAMP_FORMAT};
use crate::error::{Error, Result};
use crate::model::Model;
use crate::train::TrainReport;

pub const DEFAULT_BIN_WIDTH: f64 = 25.0;
pub const DEFAULT_MAX_BINS: usize = 20;

/// Forecast quality in physical units (µg/m³).
#[derive(Debug, Clone, PartialEq)]
pub struct EvalResult {
    pub mse: f64,
    pub rmse: f64,
    pub n: usize,
    /// Target window starts; empty when the result came from bare vectors.
    pub timestamps: Vec<NaiveDateTime>,
    pub truths: Vec<f64>,
    pub preds: Vec<f64>,
}

pub fn mean_squared_error(preds: &[f64], truths: &[f64]) -> Result<f64> {
    if preds.len() != truths.len() {
        return Err(Error::Dimension {
            op: "mean squared error",
            left: vec![preds.len()],
            right: vec![truths.len()],
        });
    }
    if preds.is_empty() {
        return Err(Error::Config("cannot compute metrics over zero samples".into()));
    }
    let total: f64 = preds.iter().zip(truths).map(|(p, t)| (p - t) * (p - t)).sum();
    let mse = total / preds.len() as f64;
    if !mse.is_finite() {
        return Err(Error::Numeric { op: "mean squared error" });
    }
    Ok(mse)
}

pub fn compute_metrics(preds: &[f64], truths: &[f64]) -> Result<EvalResult> {
    let mse = mean_squared_error(preds, truths)?;
    Ok(EvalResult {
        mse,
        rmse: mse.sqrt(),
        n: preds.len(),
        timestamps: Vec::new(),
        truths: truths.to_vec(),
        preds: preds.to_vec(),
    })
}

/// Predicts that the next window repeats the last observed window mean.
pub fn persistence_baseline(samples: &SampleSet) -> Vec<f64> {
    samples.last_pm25.clone()
}

/// Model and baseline scores over one sample set.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub model: EvalResult,
    pub baseline: EvalResult,
    /// Model MSE on the normalized target scale.
    pub normalized_mse: f64,
}

impl Evaluation {
    /// Fractional RMSE reduction relative to the baseline.
    pub fn improvement(&self) -> f64 {
        1.0 - self.model.rmse / self.baseline.rmse
    }
}

impl fmt::Display for Evaluation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "n = {}", self.model.n)?;
        writeln!(f, "mse = {}", self.model.mse)?;
        writeln!(f, "rmse = {}", self.model.rmse)?;
        writeln!(f, "baseline_mse = {}", self.baseline.mse)?;
        writeln!(f, "baseline_rmse = {}", self.baseline.rmse)?;
        writeln!(f, "normalized_mse = {}", self.normalized_mse)
    }
}

pub fn evaluate(model: &Model, samples: &SampleSet) -> Result<Evaluation> {
    let target = model.stats.target_range()?;
    let mut preds = Vec::with_capacity(samples.len());
    let mut norm_total = 0.0;
    for (x, &t) in samples.inputs.iter().zip(&samples.targets) {
        let y = model.predict_normalized(x)?;
        norm_total += (y - t) * (y - t);
        preds.push(crate::layers::rescale(y, &target)?);
    }
    let mut result = compute_metrics(&preds, &samples.target_pm25)?;
    result.timestamps = samples.timestamps.clone();
    let mut baseline = compute_metrics(&persistence_baseline(samples), &samples.target_pm25)?;
    baseline.timestamps = samples.timestamps.clone();
    Ok(Evaluation {
        model: result,
        baseline,
        normalized_mse: norm_total / samples.len() as f64,
    })
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path).map_err(|e| Error::io(path, e))?))
}

pub fn write_forecast<W: Write>(mut out: W, timestamps: &[NaiveDateTime], truths: &[f64], preds: &[f64]) -> std::io::Result<()> {
    writeln!(out, "timestamp,truth_ugm3,pred_ugm3")?;
    for ((ts, t), p) in timestamps.iter().zip(truths).zip(preds) {
        writeln!(out, "{},{t},{p}", ts.format(TIMESTAMP_FORMAT))?;
    }
    out.flush()
}

pub fn export_forecast_csv(result: &EvalResult, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    if result.timestamps.len() != result.n {
        return Err(Error::Schema("forecast export needs one timestamp per prediction".into()));
    }
    write_forecast(create(path)?, &result.timestamps, &result.truths, &result.preds).map_err(|e| Error::io(path, e))
}

pub fn write_loss<W: Write>(mut out: W, report: &TrainReport) -> std::io::Result<()> {
    writeln!(out, "epoch,train_loss,val_loss")?;
    for e in &report.epochs {
        match e.val_loss {
            Some(v) => writeln!(out, "{},{},{v}", e.epoch, e.train_loss)?,
            None => writeln!(out, "{},{},", e.epoch, e.train_loss)?,
        }
    }
    out.flush()
}

pub fn export_loss_csv(report: &TrainReport, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    write_loss(create(path)?, report).map_err(|e| Error::io(path, e))
}

#[derive(Debug, Clone, PartialEq)]
pub struct HistogramBin {
    pub start: f64,
    /// `None` for the open-ended last bin.
    pub end: Option<f64>,
    pub count: usize,
}

/// Fixed-width bins starting at 0. The last bin is open-ended and there are
/// at most `max_bins` of them; values below 0 land in the first bin and
/// non-finite values are skipped.
pub fn histogram(values: &[f64], width: f64, max_bins: usize) -> Result<Vec<HistogramBin>> {
    if !(width.is_finite() && width > 0.0) {
        return Err(Error::Config(format!("histogram bin width must be positive, got {width}")));
    }
    if max_bins == 0 {
        return Err(Error::Config("histogram needs at least one bin".into()));
    }
    let finite: Vec<f64> = values.iter().copied().filter(|v| v.is_finite()).collect();
    let bin_of = |v: f64| ((v.max(0.0) / width).floor() as usize).min(max_bins - 1);
    let n_bins = finite.iter().map(|&v| bin_of(v) + 1).max().unwrap_or(0);
    let mut bins: Vec<HistogramBin> = (0..n_bins)
        .map(|i| HistogramBin {
            start: i as f64 * width,
            end: (i + 1 < n_bins).then(|| (i + 1) as f64 * width),
            count: 0,
        })
        .collect();
    for v in finite {
        bins[bin_of(v)].count += 1;
    }
    Ok(bins)
}

pub fn write_histogram<W: Write>(mut out: W, bins: &[HistogramBin]) -> std::io::Result<()> {
    writeln!(out, "bin_start,bin_end,count")?;
    for b in bins {
        match b.end {
            Some(end) => writeln!(out, "{},{end},{}", b.start, b.count)?,
            None => writeln!(out, "{},inf,{}", b.start, b.count)?,
        }
    }
    out.flush()
}

pub fn export_histogram(values: &[f64], width: f64, max_bins: usize, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let bins = histogram(values, width, max_bins)?;
    write_histogram(create(path)?, &bins).map_err(|e| Error::io(path, e))
}
