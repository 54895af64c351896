//! Lookback samples, the chronological split and leakage-free normalization.

use std::collections::BTreeSet;
use std::fmt;

use chrono::NaiveDateTime;

use super::normalize::NormalizationStats;
use super::window::{is_next_window, WindowRecord, WindowSet};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub const DEFAULT_LOOKBACK: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Validation,
    Test,
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Validation => "validation",
            Split::Test => "test",
        })
    }
}

/// Model-ready samples. Each input is `[lookback, features]` normalized; the
/// target is the normalized PM2.5 mean of the window right after the input.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SampleSet {
    pub split: Option<Split>,
    pub inputs: Vec<Tensor>,
    pub targets: Vec<f64>,
    /// Start of each target window.
    pub timestamps: Vec<NaiveDateTime>,
    /// Physical PM2.5 mean of each target window.
    pub target_pm25: Vec<f64>,
    /// Physical PM2.5 mean of the last input window.
    pub last_pm25: Vec<f64>,
}

impl SampleSet {
    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    fn slice(&self, range: std::ops::Range<usize>, split: Split) -> SampleSet {
        SampleSet {
            split: Some(split),
            inputs: self.inputs[range.clone()].to_vec(),
            targets: self.targets[range.clone()].to_vec(),
            timestamps: self.timestamps[range.clone()].to_vec(),
            target_pm25: self.target_pm25[range.clone()].to_vec(),
            last_pm25: self.last_pm25[range].to_vec(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitRatios {
    pub train: f64,
    pub validation: f64,
    pub test: f64,
}

impl Default for SplitRatios {
    fn default() -> Self {
        Self {
            train: 0.70,
            validation: 0.15,
            test: 0.15,
        }
    }
}

impl SplitRatios {
    pub fn validate(&self) -> Result<()> {
        let all = [self.train, self.validation, self.test];
        if all.iter().any(|r| !(r.is_finite() && *r > 0.0)) {
            return Err(Error::Config(format!("split ratios must be positive, got {all:?}")));
        }
        if (all.iter().sum::<f64>() - 1.0).abs() > 1e-6 {
            return Err(Error::Config(format!("split ratios must sum to 1, got {all:?}")));
        }
        Ok(())
    }
}

/// Sizes of the train / validation / test partitions of `n` samples: the
/// first two are floors, the test split takes the remainder.
pub fn split_counts(n: usize, ratios: &SplitRatios) -> Result<(usize, usize, usize)> {
    ratios.validate()?;
    if n < 3 {
        return Err(Error::TooFewSamples { n });
    }
    // the epsilon absorbs representation error, e.g. 0.7 * 30 = 20.999…
    let floor = |r: f64| ((r * n as f64) + 1e-9).floor() as usize;
    let train = floor(ratios.train);
    let val = floor(ratios.validation).min(n - train);
    Ok((train, val, n - train - val))
}

/// Start indices of every run of `lookback + 1` consecutive windows (the
/// lookback span plus its target) with no gap.
pub fn contiguous_starts(windows: &[WindowRecord], lookback: usize) -> Vec<usize> {
    if lookback == 0 || windows.len() <= lookback {
        return Vec::new();
    }
    // run[i]: number of consecutive windows ending at i
    let mut run = vec![1usize; windows.len()];
    for i in 1..windows.len() {
        if is_next_window(&windows[i - 1], &windows[i]) {
            run[i] = run[i - 1] + 1;
        }
    }
    (lookback..windows.len())
        .filter(|&end| run[end] > lookback)
        .map(|end| end - lookback)
        .collect()
}

fn materialize(set: &WindowSet, starts: &[usize], lookback: usize, stats: &NormalizationStats) -> Result<SampleSet> {
    if stats.names != set.feature_names {
        return Err(Error::Schema(format!(
            "feature columns {:?} do not match normalization stats {:?}",
            set.feature_names, stats.names
        )));
    }
    let target = stats.target_range()?;
    let f = set.feature_count();
    let mut out = SampleSet::default();
    for &s in starts {
        let span = &set.windows[s..s + lookback];
        let data: Vec<f64> = span.iter().flat_map(|w| stats.apply(&w.features)).collect();
        let next = &set.windows[s + lookback];
        out.inputs.push(Tensor::new(vec![lookback, f], data)?);
        out.targets.push(target.apply(next.pm25_mean));
        out.timestamps.push(next.start);
        out.target_pm25.push(next.pm25_mean);
        out.last_pm25.push(span[lookback - 1].pm25_mean);
    }
    Ok(out)
}

/// Builds every sample whose `lookback` input windows and target window are
/// consecutive. Spans that straddle a gap produce nothing.
pub fn make_samples(set: &WindowSet, lookback: usize, stats: &NormalizationStats) -> Result<SampleSet> {
    if lookback == 0 {
        return Err(Error::Config("lookback must be at least 1".into()));
    }
    materialize(set, &contiguous_starts(&set.windows, lookback), lookback, stats)
}

/// Splits time-ordered samples into train / validation / test without shuffling.
pub fn chronological_split(samples: &SampleSet, ratios: &SplitRatios) -> Result<(SampleSet, SampleSet, SampleSet)> {
    let (tr, va, _) = split_counts(samples.len(), ratios)?;
    let n = samples.len();
    Ok((
        samples.slice(0..tr, Split::Train),
        samples.slice(tr..tr + va, Split::Validation),
        samples.slice(tr + va..n, Split::Test),
    ))
}

#[derive(Debug, Clone)]
pub struct Datasets {
    pub stats: NormalizationStats,
    pub train: SampleSet,
    pub validation: SampleSet,
    pub test: SampleSet,
}

/// Indices of the windows the training samples read (inputs and targets).
pub fn training_window_indices(windows: &[WindowRecord], lookback: usize, ratios: &SplitRatios) -> Result<BTreeSet<usize>> {
    let starts = contiguous_starts(windows, lookback);
    let (tr, _, _) = split_counts(starts.len(), ratios)?;
    Ok(starts[..tr].iter().flat_map(|&s| s..=s + lookback).collect())
}

/// Samples, splits and normalizes `set`, fitting the normalizer on the
/// windows used by the training split only.
pub fn prepare_datasets(set: &WindowSet, lookback: usize, ratios: &SplitRatios) -> Result<Datasets> {
    if lookback == 0 {
        return Err(Error::Config("lookback must be at least 1".into()));
    }
    let train_idx = training_window_indices(&set.windows, lookback, ratios)?;
    let stats = NormalizationStats::fit(
        &set.feature_names,
        train_idx.iter().map(|&i| set.windows[i].features.as_slice()),
    )?;
    prepare_datasets_with_stats(set, lookback, ratios, stats)
}

/// As [`prepare_datasets`] but with previously fitted statistics.
pub fn prepare_datasets_with_stats(
    set: &WindowSet,
    lookback: usize,
    ratios: &SplitRatios,
    stats: NormalizationStats,
) -> Result<Datasets> {
    let samples = make_samples(set, lookback, &stats)?;
    let (train, validation, test) = chronological_split(&samples, ratios)?;
    Ok(Datasets {
        stats,
        train,
        validation,
        test,
    })
}
