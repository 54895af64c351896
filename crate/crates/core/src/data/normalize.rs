use crate::error::{Error, Result};

/// Min-max range of one feature.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeatureRange {
    pub min: f64,
    pub max: f64,
}

impl FeatureRange {
    /// `(x − min) / (max − min)`. Not clamped: values outside the fitted range
    /// map outside `[0, 1]`.
    pub fn apply(&self, x: f64) -> f64 {
        (x - self.min) / (self.max - self.min)
    }

    pub fn invert(&self, y: f64) -> f64 {
        y * (self.max - self.min) + self.min
    }

    pub(crate) fn check_degenerate(&self, feature: &str) -> Result<()> {
        if self.max > self.min {
            Ok(())
        } else {
            Err(Error::DegenerateFeature {
                feature: feature.to_string(),
                value: self.min,
            })
        }
    }
}

/// Per-feature min/max fitted on the training split.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizationStats {
    pub names: Vec<String>,
    pub ranges: Vec<FeatureRange>,
}

pub const TARGET_FEATURE: &str = "pm25";

impl NormalizationStats {
    pub fn new(names: Vec<String>, ranges: Vec<FeatureRange>) -> Result<Self> {
        if names.len() != ranges.len() {
            return Err(Error::Schema(format!(
                "{} feature names but {} ranges",
                names.len(),
                ranges.len()
            )));
        }
        for (n, r) in names.iter().zip(&ranges) {
            r.check_degenerate(n)?;
        }
        Ok(Self { names, ranges })
    }

    /// Fits min/max per feature over `rows`. A feature whose values are all
    /// equal is an error, since it cannot be mapped onto `[0, 1]`.
    pub fn fit<'a>(names: &[String], rows: impl IntoIterator<Item = &'a [f64]>) -> Result<Self> {
        let mut ranges = vec![
            FeatureRange {
                min: f64::INFINITY,
                max: f64::NEG_INFINITY
            };
            names.len()
        ];
        let mut seen = 0usize;
        for row in rows {
            if row.len() != names.len() {
                return Err(Error::Dimension {
                    op: "fit_normalizer",
                    left: vec![row.len()],
                    right: vec![names.len()],
                });
            }
            for (r, &v) in ranges.iter_mut().zip(row) {
                r.min = r.min.min(v);
                r.max = r.max.max(v);
            }
            seen += 1;
        }
        if seen == 0 {
            return Err(Error::Schema("cannot fit normalizer on zero rows".into()));
        }
        Self::new(names.to_vec(), ranges)
    }

    pub fn len(&self) -> usize {
        self.ranges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ranges.is_empty()
    }

    pub fn apply(&self, row: &[f64]) -> Vec<f64> {
        row.iter().zip(&self.ranges).map(|(&x, r)| r.apply(x)).collect()
    }

    pub fn invert(&self, row: &[f64]) -> Vec<f64> {
        row.iter().zip(&self.ranges).map(|(&y, r)| r.invert(y)).collect()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    /// Range of the PM2.5 feature, which also normalizes the target.
    pub fn target_range(&self) -> Result<FeatureRange> {
        self.index_of(TARGET_FEATURE)
            .map(|i| self.ranges[i])
            .ok_or_else(|| Error::Schema(format!("no `{TARGET_FEATURE}` feature in normalization stats")))
    }
}
