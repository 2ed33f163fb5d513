//! Regularly sampled log-price paths with trading-day segmentation.
//!
//! The internal clock is the trading day: one session is 6.5 hours
//! (23,400 seconds), so a 5-second grid yields 4,680 increments per day.
//! Conversions to calendar years use 252 trading days.

use std::collections::BTreeMap;

use crate::error::{Error, Result};

/// Seconds in one trading session (6.5 hours).
pub const SECONDS_PER_DAY: f64 = 23_400.0;

/// Trading days per calendar year.
pub const DAYS_PER_YEAR: f64 = 252.0;

/// A log-price path observed on a regular grid, segmented by trading day.
///
/// Observations within a day are `step_seconds` apart. `day_offsets[d]` is
/// the index of day `d`'s first observation; increments are never formed
/// across day boundaries, so overnight returns are excluded by construction.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SampledPath {
    step_seconds: f64,
    observations: Vec<f64>,
    day_offsets: Vec<usize>,
    #[serde(default)]
    metadata: BTreeMap<String, String>,
}

impl SampledPath {
    pub fn new(
        step_seconds: f64,
        observations: Vec<f64>,
        day_offsets: Vec<usize>,
    ) -> Result<Self> {
        if !(step_seconds > 0.0) || !step_seconds.is_finite() {
            return Err(Error::Config(format!(
                "step_seconds must be positive and finite, got {step_seconds}"
            )));
        }
        if observations.len() < 2 {
            return Err(Error::Config(format!(
                "path needs at least 2 observations, got {}",
                observations.len()
            )));
        }
        if day_offsets.first() != Some(&0) {
            return Err(Error::Config(
                "day_offsets must start at index 0".to_string(),
            ));
        }
        for w in day_offsets.windows(2) {
            if w[1] <= w[0] {
                return Err(Error::Config(format!(
                    "day_offsets must be strictly increasing, got {} then {}",
                    w[0], w[1]
                )));
            }
        }
        if let Some(&last) = day_offsets.last() {
            if last >= observations.len() {
                return Err(Error::Config(format!(
                    "day offset {last} out of range for {} observations",
                    observations.len()
                )));
            }
        }
        if observations.iter().any(|x| !x.is_finite()) {
            return Err(Error::Data("non-finite observation in path".to_string()));
        }
        Ok(Self {
            step_seconds,
            observations,
            day_offsets,
            metadata: BTreeMap::new(),
        })
    }

    /// Single-day path covering all observations.
    pub fn single_day(step_seconds: f64, observations: Vec<f64>) -> Result<Self> {
        Self::new(step_seconds, observations, vec![0])
    }

    pub fn step_seconds(&self) -> f64 {
        self.step_seconds
    }

    /// Grid step in trading-day units.
    pub fn step_days(&self) -> f64 {
        self.step_seconds / SECONDS_PER_DAY
    }

    pub fn observations(&self) -> &[f64] {
        &self.observations
    }

    pub fn day_offsets(&self) -> &[usize] {
        &self.day_offsets
    }

    pub fn n_days(&self) -> usize {
        self.day_offsets.len()
    }

    /// Half-open observation index range `[start, end)` for day `d`.
    pub fn day_range(&self, d: usize) -> (usize, usize) {
        let start = self.day_offsets[d];
        let end = if d + 1 < self.day_offsets.len() {
            self.day_offsets[d + 1]
        } else {
            self.observations.len()
        };
        (start, end)
    }

    pub fn day_slice(&self, d: usize) -> &[f64] {
        let (s, e) = self.day_range(d);
        &self.observations[s..e]
    }

    /// Number of base-frequency increments in day `d`.
    pub fn day_increment_count(&self, d: usize) -> usize {
        let (s, e) = self.day_range(d);
        (e - s).saturating_sub(1)
    }

    /// Elapsed in-session time of day `d` in trading-day units.
    pub fn day_span_days(&self, d: usize) -> f64 {
        self.day_increment_count(d) as f64 * self.step_days()
    }

    /// Total in-session time span in trading-day units (overnight gaps excluded).
    pub fn t_span_days(&self) -> f64 {
        (self.observations.len() - self.day_offsets.len()) as f64 * self.step_days()
    }

    pub fn metadata(&self) -> &BTreeMap<String, String> {
        &self.metadata
    }

    pub fn metadata_mut(&mut self) -> &mut BTreeMap<String, String> {
        &mut self.metadata
    }

    pub fn with_metadata(mut self, key: &str, value: &str) -> Self {
        self.metadata.insert(key.to_string(), value.to_string());
        self
    }

    /// Map every observation in place (used by the noise overlay).
    pub(crate) fn map_observations(&mut self, mut f: impl FnMut(usize, f64) -> f64) {
        for (i, x) in self.observations.iter_mut().enumerate() {
            *x = f(i, *x);
        }
    }
}

/// Non-overlapping increments of a path at a given stride, day-segmented.
///
/// For each day the blocks start at the day's first observation; a trailing
/// partial block is dropped. `day_offsets` segments `values` the same way
/// the parent path is segmented.
#[derive(Debug, Clone, PartialEq)]
pub struct IncrementSeries {
    pub values: Vec<f64>,
    pub day_offsets: Vec<usize>,
    pub stride: usize,
    /// Effective step `stride * step_seconds` in seconds.
    pub source_step_seconds: f64,
}

impl IncrementSeries {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn n_days(&self) -> usize {
        self.day_offsets.len()
    }

    /// Half-open index range into `values` for day `d`.
    pub fn day_range(&self, d: usize) -> (usize, usize) {
        let start = self.day_offsets[d];
        let end = if d + 1 < self.day_offsets.len() {
            self.day_offsets[d + 1]
        } else {
            self.values.len()
        };
        (start, end)
    }

    pub fn day_values(&self, d: usize) -> &[f64] {
        let (s, e) = self.day_range(d);
        &self.values[s..e]
    }
}
