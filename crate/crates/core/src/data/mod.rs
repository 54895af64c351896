//! Raw hourly CSV → cleaned records → six-hour windows → normalized samples.

mod normalize;
mod record;
mod samples;
mod window;

pub use normalize::{FeatureRange, NormalizationStats, TARGET_FEATURE};
pub use record::{
    clean, encode_wind, parse_csv, parse_csv_reader, ColumnSchema, ParseReport, ParsedCsv, RawRecord,
    RowReject, WindDirection,
};
pub use samples::{
    chronological_split, contiguous_starts, make_samples, prepare_datasets, prepare_datasets_with_stats,
    split_counts, training_window_indices, Datasets, SampleSet, Split, SplitRatios, DEFAULT_LOOKBACK,
};
pub use window::{
    aggregate_windows, base_feature_names, derive_features, is_next_window, read_windows, read_windows_csv,
    top_weather_tokens, window_start, write_windows, write_windows_csv, AggregateOptions, WindowRecord,
    WindowSet, DEFAULT_COVERAGE, DERIVED_FEATURES, TIMESTAMP_FORMAT, WINDOW_HOURS,
};

use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PreprocessOptions {
    pub coverage: usize,
    /// One-hot encode this many of the most frequent `weather` tokens (0 ignores the column).
    pub weather_top_k: usize,
}

impl Default for PreprocessOptions {
    fn default() -> Self {
        Self {
            coverage: DEFAULT_COVERAGE,
            weather_top_k: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PreprocessReport {
    pub rows_read: usize,
    pub rows_rejected: usize,
    /// Parsed rows removed by cleaning (missing values, duplicates).
    pub rows_dropped: usize,
    pub rows_kept: usize,
    pub windows_kept: usize,
}

impl fmt::Display for PreprocessReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "rows_read = {}", self.rows_read)?;
        writeln!(f, "rows_rejected = {}", self.rows_rejected)?;
        writeln!(f, "rows_dropped = {}", self.rows_dropped)?;
        writeln!(f, "rows_kept = {}", self.rows_kept)?;
        writeln!(f, "windows_kept = {}", self.windows_kept)
    }
}

/// Runs clean → aggregate → derive over already parsed input.
pub fn preprocess(parsed: ParsedCsv, opts: &PreprocessOptions) -> (WindowSet, PreprocessReport) {
    let parsed_rows = parsed.records.len();
    let cleaned = clean(parsed.records, &parsed.schema);
    let agg = AggregateOptions {
        coverage: opts.coverage,
        weather_tokens: if parsed.schema.has_weather {
            top_weather_tokens(&cleaned, opts.weather_top_k)
        } else {
            Vec::new()
        },
    };
    let windows = derive_features(aggregate_windows(&cleaned, &parsed.schema, &agg));
    let report = PreprocessReport {
        rows_read: parsed.report.rows_read,
        rows_rejected: parsed.report.rejected.len(),
        rows_dropped: parsed_rows - cleaned.len(),
        rows_kept: cleaned.len(),
        windows_kept: windows.len(),
    };
    (windows, report)
}
