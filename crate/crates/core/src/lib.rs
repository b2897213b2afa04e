//! Distributed neonatal seizure detection.
//!
//! Local detectors trained on disjoint patient subsets emit per-segment
//! seizure probabilities; a trusted agent fuses them by majority vote,
//! mean, stacked weighted mean or Dawid–Skene EM. The crate covers the
//! EEG preprocessing chain, the detectors, the fusion schemes, segment-
//! and event-based evaluation and the leave-one-subject-out experiment.

pub mod aggregation;
pub mod coredata;
pub mod detectors;
pub mod error;
pub mod metrics;
pub mod rng;
pub mod signal;
pub mod simulation;

pub use error::{Error, Result};
