//! Multiple likelihood-ratio testing on grouped, timestamped data.
//!
//! Observations are binned into unit-time bins ([`binning`]), pooled into
//! windows of `G` consecutive bins and turned into likelihood-ratio
//! statistics ([`lrstats`]). The disjoint-window procedure rejects when `k`
//! windows fire; the sliding-window procedure uses every run of `G` bins and
//! requires the `k` firing windows to be at least `G` apart ([`decision`]).
//! The sliding statistics are correlated; their joint chi-squared limit is
//! sampled in [`limitlaw`] and used to calibrate thresholds. [`simharness`]
//! generates synthetic data to check the limit laws and compare power.

pub mod binning;
pub mod cli;
pub mod decision;
pub mod io;
pub mod limitlaw;
pub mod lrstats;
pub mod model;
pub mod rng;
pub mod simharness;
pub mod stats;

pub use binning::{bin_observations, shift_origin, BinnedDataset, TimedObservation};
pub use decision::{calibrate_alpha, reject_new, reject_standard, DecisionConfig, DecisionReport};
pub use limitlaw::{correlation_matrix, CorrelationMatrix};
pub use lrstats::{lambda_new, lambda_standard, LrKind, LrVector};
pub use model::{Family, NullSpec, ParametricModel, Parameter};
