//! Drift detection for data streams with missing values.
//!
//! The pipeline partitions the feature space with k-means, turns each window
//! into per-bin frequencies, and decides drift with a Pearson chi-square
//! two-sample test. Missing values never get filled in one by one: a masked
//! distance learner estimates observation-to-centroid distances directly,
//! and the estimation error is carried into the histogram as fuzzy weights
//! spread over the nearest bins.
//!
//! Start with the runnable examples (`cargo run --release --example
//! detect_drift`), or with [`harness::detect`] for the end-to-end detector
//! and [`harness::run_ablation`] for the experiment presets.

pub mod cluster;
pub mod data;
pub mod error;
pub mod fwf;
pub mod gbdt;
pub mod harness;
pub mod impute;
pub mod io;
pub mod mdl;
pub mod report;
pub mod rng;
pub mod special;
pub mod stats;
pub mod synth;

pub use data::{MissingRateVector, ObservationSet};
pub use error::{Error, Result};
pub use rng::RandomSource;
