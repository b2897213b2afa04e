//! Fusion of per-detector probabilities into one consensus score per segment.

pub mod dawid_skene;
pub mod stacking;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::coredata::{PredictionMatrix, LABEL_THRESHOLD};
use crate::error::{Error, Result};

pub use dawid_skene::{
    dawid_skene, ds_e_step, ds_log_likelihood, ds_m_step, DawidSkeneState, DsTheta, PARAM_CLAMP, DS_EPSILON,
    DS_MAX_ITERATIONS,
};
pub use stacking::{fit_stacking, weighted_mean, StackingConfig, StackingModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    Mv,
    Mean,
    Wmean,
    Ds,
}

impl Scheme {
    pub const ALL: [Scheme; 4] = [Scheme::Mv, Scheme::Mean, Scheme::Wmean, Scheme::Ds];

    pub fn as_str(self) -> &'static str {
        match self {
            Scheme::Mv => "mv",
            Scheme::Mean => "mean",
            Scheme::Wmean => "wmean",
            Scheme::Ds => "ds",
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Scheme::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown scheme {s:?}, expected mv, mean, wmean or ds")))
    }
}

fn require_non_empty(matrix: &PredictionMatrix) -> Result<()> {
    if matrix.n_segments() == 0 || matrix.n_detectors() == 0 {
        return Err(Error::Empty(format!(
            "prediction matrix is {}x{}",
            matrix.n_segments(),
            matrix.n_detectors()
        )));
    }
    Ok(())
}

/// Share of detectors whose hard label is seizure.
pub fn majority_vote(matrix: &PredictionMatrix) -> Result<Vec<f64>> {
    require_non_empty(matrix)?;
    let r = matrix.n_detectors() as f64;
    Ok(matrix
        .rows()
        .map(|row| row.iter().filter(|&&p| p >= LABEL_THRESHOLD).count() as f64 / r)
        .collect())
}

pub fn mean_aggregate(matrix: &PredictionMatrix) -> Result<Vec<f64>> {
    require_non_empty(matrix)?;
    let r = matrix.n_detectors() as f64;
    Ok(matrix.rows().map(|row| row.iter().sum::<f64>() / r).collect())
}

/// `score ≥ tau` maps to seizure.
pub fn threshold_labels(scores: &[f64], tau: f64) -> Vec<bool> {
    scores.iter().map(|&s| s >= tau).collect()
}

pub(crate) fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}
