//! Brute-force reference implementations and random instance generators.
//! None of these call into the code they are compared against.

use std::collections::{BTreeMap, HashSet};

use aeroforecast::data::{
    aggregate_windows, clean, contiguous_starts, split_counts, AggregateOptions, ColumnSchema, RawRecord, SplitRatios,
    WindDirection, WindowRecord,
};
use aeroforecast::eval::compute_metrics;
use aeroforecast::layers::maxpool1d_forward;
use aeroforecast::Tensor;
use chrono::{Duration, NaiveDate, NaiveDateTime, Timelike};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const INSTANCES: u64 = 1000;
pub const REL_TOL: f64 = 1e-9;

pub fn close(a: f64, b: f64) -> bool {
    a == b || (a - b).abs() <= REL_TOL * a.abs().max(b.abs())
}

fn base_time() -> NaiveDateTime {
    NaiveDate::from_ymd_opt(2012, 2, 27).unwrap().and_hms_opt(0, 0, 0).unwrap()
}

fn maybe(rng: &mut impl Rng, p_missing: f64, range: std::ops::Range<f64>) -> Option<f64> {
    let v = rng.random_range(range);
    (!rng.random_bool(p_missing)).then_some(v)
}

/// Shuffled hourly records over one to three days with missing values,
/// skipped hours and duplicated timestamps.
pub fn random_records(rng: &mut impl Rng, schema: &ColumnSchema) -> Vec<RawRecord> {
    let hours = rng.random_range(1..72);
    let p_missing = rng.random_range(0.0..0.3);
    let mut out = Vec::new();
    for h in 0..hours {
        if rng.random_bool(0.15) {
            continue;
        }
        let copies = if rng.random_bool(0.05) { 2 } else { 1 };
        for _ in 0..copies {
            out.push(RawRecord {
                timestamp: base_time() + Duration::hours(h),
                pm25: maybe(rng, p_missing, 0.0..600.0),
                dewp: maybe(rng, p_missing / 4.0, -30.0..25.0),
                temp: maybe(rng, p_missing / 4.0, -20.0..40.0),
                pres: maybe(rng, p_missing / 4.0, 990.0..1045.0),
                cbwd: (!rng.random_bool(p_missing / 4.0)).then(|| WindDirection::ALL[rng.random_range(0..4)]),
                iws: maybe(rng, p_missing / 4.0, 0.0..300.0),
                snow_hours: schema.has_snow.then(|| rng.random_range(0..5) as f64),
                rain_hours: schema.has_rain.then(|| rng.random_range(0..5) as f64),
                weather: None,
            });
        }
    }
    out.shuffle(rng);
    out
}

/// Oracle: first complete record per hour (in input order), bucketed by
/// `hour / 6`, averaged per bucket with at least `coverage` hours.
pub fn window_oracle(records: &[RawRecord], schema: &ColumnSchema, coverage: usize) -> Vec<(NaiveDateTime, usize, Vec<f64>)> {
    let mut seen = HashSet::new();
    let mut buckets: BTreeMap<NaiveDateTime, Vec<Vec<f64>>> = BTreeMap::new();
    for r in records {
        let mut row = match (r.pm25, r.dewp, r.temp, r.pres, r.iws, r.cbwd) {
            (Some(a), Some(b), Some(c), Some(d), Some(e), Some(_)) => vec![a, b, c, d, e],
            _ => continue,
        };
        if schema.has_snow {
            match r.snow_hours {
                Some(v) => row.push(v),
                None => continue,
            }
        }
        if schema.has_rain {
            match r.rain_hours {
                Some(v) => row.push(v),
                None => continue,
            }
        }
        let dir = r.cbwd.unwrap();
        for d in [WindDirection::NorthEast, WindDirection::NorthWest, WindDirection::SouthEast, WindDirection::Calm] {
            row.push(if d == dir { 1.0 } else { 0.0 });
        }
        if !seen.insert(r.timestamp) {
            continue;
        }
        let ts = r.timestamp;
        let bucket = ts.date().and_hms_opt(ts.hour() / 6 * 6, 0, 0).unwrap();
        buckets.entry(bucket).or_default().push(row);
    }
    buckets
        .into_iter()
        .filter(|(_, rows)| rows.len() >= coverage)
        .map(|(start, rows)| {
            let means = (0..rows[0].len())
                .map(|c| rows.iter().map(|r| r[c]).sum::<f64>() / rows.len() as f64)
                .collect();
            (start, rows.len(), means)
        })
        .collect()
}

pub fn window_means_instance(seed: u64) -> Result<(), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let schema = ColumnSchema {
        has_snow: rng.random_bool(0.5),
        has_rain: rng.random_bool(0.5),
        has_weather: false,
    };
    let records = random_records(&mut rng, &schema);
    let coverage = rng.random_range(1..=6);
    let expected = window_oracle(&records, &schema, coverage);
    let opts = AggregateOptions {
        coverage,
        weather_tokens: Vec::new(),
    };
    let got = aggregate_windows(&clean(records, &schema), &schema, &opts);
    if got.windows.len() != expected.len() {
        return Err(format!("seed {seed}: {} windows, oracle {}", got.windows.len(), expected.len()));
    }
    for (w, (start, hours, means)) in got.windows.iter().zip(&expected) {
        if w.start != *start || usize::from(w.valid_hours) != *hours {
            return Err(format!("seed {seed}: window {} ({}h) vs oracle {start} ({hours}h)", w.start, w.valid_hours));
        }
        if !close(w.pm25_mean, means[0]) || w.features.len() != means.len() {
            return Err(format!("seed {seed}: window {start} pm25 {} vs {}", w.pm25_mean, means[0]));
        }
        if let Some(c) = (0..means.len()).find(|&c| !close(w.features[c], means[c])) {
            return Err(format!("seed {seed}: window {start} feature {c}: {} vs {}", w.features[c], means[c]));
        }
    }
    Ok(())
}

/// Oracle: count starts whose `lookback + 1` windows are pairwise 6 h apart.
pub fn sample_count_oracle(starts: &[NaiveDateTime], lookback: usize) -> usize {
    if starts.len() <= lookback {
        return 0;
    }
    (0..starts.len() - lookback)
        .filter(|&s| (s..s + lookback).all(|i| starts[i + 1] - starts[i] == Duration::hours(6)))
        .count()
}

pub fn sample_count_instance(seed: u64) -> Result<(), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(0..60);
    let mut t = base_time();
    let mut windows = Vec::with_capacity(n);
    for _ in 0..n {
        windows.push(WindowRecord {
            start: t,
            features: vec![0.0],
            pm25_mean: 0.0,
            valid_hours: 6,
        });
        let skip = if rng.random_bool(0.1) { rng.random_range(2..5) } else { 1 };
        t += Duration::hours(6 * skip);
    }
    let lookback = rng.random_range(1..12);
    let starts: Vec<NaiveDateTime> = windows.iter().map(|w| w.start).collect();
    let got = contiguous_starts(&windows, lookback).len();
    let expected = sample_count_oracle(&starts, lookback);
    if got == expected {
        Ok(())
    } else {
        Err(format!("seed {seed}: {got} samples, oracle {expected} (n {n}, lookback {lookback})"))
    }
}

/// Oracle: integer arithmetic on ratios given in hundredths.
pub fn split_oracle(n: usize, percent: (usize, usize, usize)) -> (usize, usize, usize) {
    let train = n * percent.0 / 100;
    let val = n * percent.1 / 100;
    (train, val, n - train - val)
}

pub fn split_instance(seed: u64) -> Result<(), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(3..5000);
    let a = rng.random_range(1..98);
    let b = rng.random_range(1..(100 - a));
    let c = 100 - a - b;
    let ratios = SplitRatios {
        train: a as f64 / 100.0,
        validation: b as f64 / 100.0,
        test: c as f64 / 100.0,
    };
    let got = split_counts(n, &ratios).map_err(|e| e.to_string())?;
    let expected = split_oracle(n, (a, b, c));
    if got == expected {
        Ok(())
    } else {
        Err(format!("seed {seed}: n {n} ratios {a}/{b}/{c}: {got:?} vs oracle {expected:?}"))
    }
}

/// Oracle: nested loops, strict `>` so the earliest maximum wins.
pub fn maxpool_oracle(rows: &[Vec<f64>], width: usize) -> Vec<Vec<f64>> {
    let mut out = Vec::new();
    let mut start = 0;
    while start + width <= rows.len() {
        let mut best = rows[start].clone();
        for row in &rows[start + 1..start + width] {
            for (b, &v) in best.iter_mut().zip(row) {
                if v > *b {
                    *b = v;
                }
            }
        }
        out.push(best);
        start += width;
    }
    out
}

pub fn maxpool_instance(seed: u64) -> Result<(), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let width = rng.random_range(1..5);
    let t = rng.random_range(width..20);
    let c = rng.random_range(1..6);
    // small integer values make ties common
    let rows: Vec<Vec<f64>> = (0..t).map(|_| (0..c).map(|_| rng.random_range(-3..4) as f64).collect()).collect();
    let x = Tensor::new(vec![t, c], rows.concat()).unwrap();
    let (got, _) = maxpool1d_forward(&x, width).map_err(|e| e.to_string())?;
    let expected = maxpool_oracle(&rows, width);
    if got.shape() != [expected.len(), c] || got.data() != expected.concat().as_slice() {
        return Err(format!("seed {seed}: maxpool mismatch for T={t}, C={c}, width={width}"));
    }
    Ok(())
}

/// Oracle: compensated summation of squared errors.
pub fn mse_oracle(preds: &[f64], truths: &[f64]) -> f64 {
    let (mut sum, mut comp) = (0.0f64, 0.0f64);
    for (p, t) in preds.iter().zip(truths) {
        let y = (t - p).powi(2) - comp;
        let s = sum + y;
        comp = (s - sum) - y;
        sum = s;
    }
    sum / preds.len() as f64
}

pub fn metrics_instance(seed: u64) -> Result<(), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(1..300);
    let truths: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..900.0)).collect();
    let preds: Vec<f64> = truths.iter().map(|t| t + rng.random_range(-80.0..80.0)).collect();
    let r = compute_metrics(&preds, &truths).map_err(|e| e.to_string())?;
    let mse = mse_oracle(&preds, &truths);
    if r.n != n || !close(r.mse, mse) || !close(r.rmse, mse.sqrt()) {
        return Err(format!("seed {seed}: mse {} rmse {} vs oracle {mse} {}", r.mse, r.rmse, mse.sqrt()));
    }
    Ok(())
}

pub type Check = fn(u64) -> Result<(), String>;

pub const CHECKS: [(&str, Check); 5] = [
    ("window means", window_means_instance),
    ("sample counts", sample_count_instance),
    ("split sizes", split_instance),
    ("maxpool", maxpool_instance),
    ("metrics", metrics_instance),
];
