//! Partition timestamped observations into unit-time bins.
//!
//! Bin `p` (1-based) holds the observations with `t ∈ (p − 1, p]`; the
//! right endpoint belongs to the bin. Observations outside `(0, P]` are
//! dropped and counted.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum BinningError {
    #[error("number of bins must be at least 1")]
    NoBins,
    #[error("origin offset must lie in [0, 1), got {0}")]
    InvalidOffset(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimedObservation {
    pub t: f64,
    pub x: f64,
}

impl TimedObservation {
    pub fn new(t: f64, x: f64) -> Self {
        Self { t, x }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinnedDataset {
    bins: Vec<Vec<TimedObservation>>,
    dropped: usize,
}

/// 0-based bin for `t`, or `None` when `t ∉ (0, P]`.
fn bin_index(t: f64, p: usize) -> Option<usize> {
    if !(t > 0.0 && t <= p as f64) {
        return None;
    }
    Some(t.ceil() as usize - 1)
}

impl BinnedDataset {
    /// Dataset from already-binned values. Timestamps are placed at the
    /// right edge of each bin.
    pub fn from_values(bins: Vec<Vec<f64>>) -> Self {
        let bins = bins
            .into_iter()
            .enumerate()
            .map(|(p, xs)| xs.into_iter().map(|x| TimedObservation::new((p + 1) as f64, x)).collect())
            .collect();
        Self { bins, dropped: 0 }
    }

    pub fn num_bins(&self) -> usize {
        self.bins.len()
    }

    /// `(n_1, …, n_P)`.
    pub fn counts(&self) -> Vec<usize> {
        self.bins.iter().map(Vec::len).collect()
    }

    pub fn total(&self) -> usize {
        self.bins.iter().map(Vec::len).sum()
    }

    /// Observations that fell outside `(0, P]`.
    pub fn dropped(&self) -> usize {
        self.dropped
    }

    /// Observations of bin `p`, 0-based, in ingestion order.
    pub fn bin(&self, p: usize) -> &[TimedObservation] {
        &self.bins[p]
    }

    /// Values of bins `first..=last` (0-based) concatenated in bin order.
    pub fn pooled_values(&self, first: usize, last: usize) -> Vec<f64> {
        self.bins[first..=last].iter().flatten().map(|o| o.x).collect()
    }

    /// All retained observations in bin order.
    pub fn observations(&self) -> impl Iterator<Item = &TimedObservation> {
        self.bins.iter().flatten()
    }
}

pub fn bin_observations(samples: &[TimedObservation], p: usize) -> Result<BinnedDataset, BinningError> {
    shift_origin(samples, 0.0, p)
}

/// Bin by `t' = t − offset`. Stored timestamps are the shifted ones.
pub fn shift_origin(samples: &[TimedObservation], offset: f64, p: usize) -> Result<BinnedDataset, BinningError> {
    if p == 0 {
        return Err(BinningError::NoBins);
    }
    if !(0.0..1.0).contains(&offset) {
        return Err(BinningError::InvalidOffset(offset));
    }
    let mut bins = vec![Vec::new(); p];
    let mut dropped = 0;
    for obs in samples {
        let t = obs.t - offset;
        match bin_index(t, p) {
            Some(i) => bins[i].push(TimedObservation::new(t, obs.x)),
            None => dropped += 1,
        }
    }
    Ok(BinnedDataset { bins, dropped })
}
