use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Annotator with known sensitivity and specificity.
///
/// The hard label is drawn first (correct with probability `alpha` on
/// seizures and `beta` on non-seizures); the emitted probability is then
/// `σ(±sharpness · u)` with `u` uniform, which lands on the label's side
/// of 0.5 and stays strictly inside (0, 1).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SyntheticAnnotator {
    pub alpha: f64,
    pub beta: f64,
    pub sharpness: f64,
}

impl SyntheticAnnotator {
    pub const DEFAULT_SHARPNESS: f64 = 4.0;

    pub fn new(alpha: f64, beta: f64) -> Result<Self> {
        Self::with_sharpness(alpha, beta, Self::DEFAULT_SHARPNESS)
    }

    pub fn with_sharpness(alpha: f64, beta: f64, sharpness: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&alpha) || !(0.0..=1.0).contains(&beta) {
            return Err(Error::Config(format!("alpha {alpha} and beta {beta} must lie in [0, 1]")));
        }
        if !(sharpness.is_finite() && sharpness > 0.0) {
            return Err(Error::Config(format!("sharpness {sharpness} must be positive")));
        }
        Ok(SyntheticAnnotator { alpha, beta, sharpness })
    }
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

pub fn synthetic_predict<R: Rng + ?Sized>(annotator: &SyntheticAnnotator, truth: bool, rng: &mut R) -> f64 {
    let correct = if truth {
        rng.random_bool(annotator.alpha)
    } else {
        rng.random_bool(annotator.beta)
    };
    let label = truth == correct;
    let u: f64 = rng.random();
    if label {
        // u ∈ [0, 1) puts p in [0.5, σ(s))
        sigmoid(annotator.sharpness * u)
    } else {
        // 1 - u ∈ (0, 1] puts p in [σ(-s), 0.5)
        sigmoid(-annotator.sharpness * (1.0 - u))
    }
}
