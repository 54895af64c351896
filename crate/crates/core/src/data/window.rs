//! Six-hour window aggregation, derived features and the window CSV format.
//!
//! Window file layout (UTF-8, comma separated, LF):
//!
//! ```text
//! window_start,<feature_1>,...,<feature_n>,valid_hours,target_pm25
//! 2010-01-02T00:00:00,129.5,-16.2,...,6,129.5
//! ```
//!
//! `window_start` is ISO-8601 local time aligned to 00/06/12/18 h. Feature
//! values are physical (not normalized); floats use round-trippable formatting.

use std::collections::HashMap;
use std::f64::consts::TAU;
use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use chrono::{Datelike, Duration, NaiveDateTime, NaiveTime, Timelike};

use super::record::{ColumnSchema, RawRecord};
use crate::error::{Error, Result};

pub const WINDOW_HOURS: i64 = 6;
pub const DEFAULT_COVERAGE: usize = 4;
pub const TIMESTAMP_FORMAT: &str = "%Y-%m-%dT%H:%M:%S";

#[derive(Debug, Clone, PartialEq)]
pub struct WindowRecord {
    pub start: NaiveDateTime,
    /// Per-feature means, in the order of [`WindowSet::feature_names`].
    pub features: Vec<f64>,
    pub pm25_mean: f64,
    pub valid_hours: u8,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WindowSet {
    pub feature_names: Vec<String>,
    pub windows: Vec<WindowRecord>,
}

impl WindowSet {
    pub fn feature_count(&self) -> usize {
        self.feature_names.len()
    }

    pub fn len(&self) -> usize {
        self.windows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.windows.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AggregateOptions {
    /// Minimum number of valid hourly rows for a window to be kept.
    pub coverage: usize,
    /// Weather tokens to one-hot encode; empty ignores the weather column.
    pub weather_tokens: Vec<String>,
}

impl Default for AggregateOptions {
    fn default() -> Self {
        Self {
            coverage: DEFAULT_COVERAGE,
            weather_tokens: Vec::new(),
        }
    }
}

/// The `k` most frequent weather tokens, ties broken alphabetically.
pub fn top_weather_tokens(records: &[RawRecord], k: usize) -> Vec<String> {
    let mut counts: HashMap<&str, usize> = HashMap::new();
    for w in records.iter().filter_map(|r| r.weather.as_deref()) {
        *counts.entry(w).or_default() += 1;
    }
    let mut ranked: Vec<(&str, usize)> = counts.into_iter().collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
    ranked.into_iter().take(k).map(|(t, _)| t.to_string()).collect()
}

pub fn base_feature_names(schema: &ColumnSchema, opts: &AggregateOptions) -> Vec<String> {
    let mut names: Vec<String> = ["pm25", "dewp", "temp", "pres", "iws"].map(String::from).into();
    if schema.has_snow {
        names.push("is".into());
    }
    if schema.has_rain {
        names.push("ir".into());
    }
    names.extend(["wind_ne", "wind_nw", "wind_se", "wind_cv"].map(String::from));
    names.extend(opts.weather_tokens.iter().map(|t| format!("weather_{t}")));
    names
}

fn record_features(r: &RawRecord, schema: &ColumnSchema, opts: &AggregateOptions) -> Vec<f64> {
    let mut f = vec![
        r.pm25.unwrap_or(f64::NAN),
        r.dewp.unwrap_or(f64::NAN),
        r.temp.unwrap_or(f64::NAN),
        r.pres.unwrap_or(f64::NAN),
        r.iws.unwrap_or(f64::NAN),
    ];
    if schema.has_snow {
        f.push(r.snow_hours.unwrap_or(f64::NAN));
    }
    if schema.has_rain {
        f.push(r.rain_hours.unwrap_or(f64::NAN));
    }
    f.extend(r.cbwd.map_or([f64::NAN; 4], |w| w.one_hot()));
    for t in &opts.weather_tokens {
        f.push(if r.weather.as_deref() == Some(t.as_str()) { 1.0 } else { 0.0 });
    }
    f
}

/// Start of the six-hour window containing `ts`.
pub fn window_start(ts: NaiveDateTime) -> NaiveDateTime {
    let hour = ts.hour() - ts.hour() % WINDOW_HOURS as u32;
    ts.date().and_time(NaiveTime::from_hms_opt(hour, 0, 0).expect("valid hour"))
}

/// Groups cleaned, chronologically sorted records into windows starting at
/// 00, 06, 12 and 18 h. Features and the target are means over the valid
/// hours; wind one-hots average to occupancy fractions. Windows with fewer
/// than `opts.coverage` valid hours are dropped.
pub fn aggregate_windows(records: &[RawRecord], schema: &ColumnSchema, opts: &AggregateOptions) -> WindowSet {
    let feature_names = base_feature_names(schema, opts);
    let n = feature_names.len();
    let mut windows = Vec::new();
    let mut i = 0;
    while i < records.len() {
        let start = window_start(records[i].timestamp);
        let mut sums = vec![0.0; n];
        let mut count = 0usize;
        while i < records.len() && window_start(records[i].timestamp) == start {
            for (s, v) in sums.iter_mut().zip(record_features(&records[i], schema, opts)) {
                *s += v;
            }
            count += 1;
            i += 1;
        }
        if count >= opts.coverage && count > 0 {
            let features: Vec<f64> = sums.iter().map(|s| s / count as f64).collect();
            if features.iter().all(|v| v.is_finite()) {
                windows.push(WindowRecord {
                    start,
                    pm25_mean: features[0],
                    features,
                    valid_hours: count as u8,
                });
            }
        }
    }
    WindowSet { feature_names, windows }
}

pub const DERIVED_FEATURES: [&str; 5] = ["hour_sin", "hour_cos", "doy_sin", "doy_cos", "pm25_diff"];

/// Appends cyclic time encodings (hour of day, period 24 h; day of year,
/// period 365.25 d) and the PM2.5 change from the previous window (0 for
/// the first window).
pub fn derive_features(mut set: WindowSet) -> WindowSet {
    set.feature_names.extend(DERIVED_FEATURES.map(String::from));
    let mut prev: Option<f64> = None;
    for w in &mut set.windows {
        let hour_phase = TAU * f64::from(w.start.hour()) / 24.0;
        let day = f64::from(w.start.ordinal0()) + f64::from(w.start.hour()) / 24.0;
        let doy_phase = TAU * day / 365.25;
        let diff = prev.map_or(0.0, |p| w.pm25_mean - p);
        prev = Some(w.pm25_mean);
        w.features.extend([
            hour_phase.sin(),
            hour_phase.cos(),
            doy_phase.sin(),
            doy_phase.cos(),
            diff,
        ]);
    }
    set
}

/// Whether `b` starts exactly one window after `a`.
pub fn is_next_window(a: &WindowRecord, b: &WindowRecord) -> bool {
    b.start - a.start == Duration::hours(WINDOW_HOURS)
}

pub fn write_windows<W: Write>(set: &WindowSet, out: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
    let mut header = vec!["window_start".to_string()];
    header.extend(set.feature_names.iter().cloned());
    header.push("valid_hours".into());
    header.push("target_pm25".into());
    w.write_record(&header)?;
    for win in &set.windows {
        let mut row = Vec::with_capacity(header.len());
        row.push(win.start.format(TIMESTAMP_FORMAT).to_string());
        row.extend(win.features.iter().map(f64::to_string));
        row.push(win.valid_hours.to_string());
        row.push(win.pm25_mean.to_string());
        w.write_record(&row)?;
    }
    w.flush().map_err(|e| Error::Csv(e.into()))?;
    Ok(())
}

pub fn write_windows_csv(set: &WindowSet, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_windows(set, BufWriter::new(file))
}

pub fn read_windows<R: Read>(input: R) -> Result<WindowSet> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(input);
    let header = rdr.headers()?.clone();
    let cols: Vec<&str> = header.iter().collect();
    let n = cols.len();
    if n < 4 || cols[0] != "window_start" || cols[n - 2] != "valid_hours" || cols[n - 1] != "target_pm25" {
        return Err(Error::Schema(
            "window file header must be window_start,<features...>,valid_hours,target_pm25".into(),
        ));
    }
    let feature_names: Vec<String> = cols[1..n - 2].iter().map(|s| s.to_string()).collect();
    let mut windows = Vec::new();
    for row in rdr.records() {
        let row = row?;
        let line = row.position().map_or(0, |p| p.line());
        let bad = |what: &str| Error::Schema(format!("window file line {line}: {what}"));
        let start = NaiveDateTime::parse_from_str(&row[0], TIMESTAMP_FORMAT).map_err(|_| bad("bad window_start"))?;
        let features = (1..n - 2)
            .map(|i| row[i].parse::<f64>().ok().filter(|v| v.is_finite()))
            .collect::<Option<Vec<f64>>>()
            .ok_or_else(|| bad("non-numeric feature"))?;
        let valid_hours = row[n - 2].parse::<u8>().map_err(|_| bad("bad valid_hours"))?;
        let pm25_mean = row[n - 1].parse::<f64>().map_err(|_| bad("bad target_pm25"))?;
        windows.push(WindowRecord {
            start,
            features,
            pm25_mean,
            valid_hours,
        });
    }
    Ok(WindowSet { feature_names, windows })
}

pub fn read_windows_csv(path: impl AsRef<Path>) -> Result<WindowSet> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_windows(file)
}
