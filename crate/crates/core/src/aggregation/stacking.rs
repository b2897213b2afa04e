use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{require_non_empty, sigmoid};
use crate::coredata::PredictionMatrix;
use crate::error::{Error, Result};

/// Logistic meta-classifier over detector probabilities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StackingModel {
    /// Detector ids in weight order.
    pub detector_ids: Vec<String>,
    pub weights: Vec<f64>,
    pub intercept: f64,
    /// Detector whose training data fitted the model; it stays out of the fused ensemble.
    pub holdout_detector: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StackingConfig {
    /// Inverse L2 strength; the penalty is `½‖w‖² / c`, intercept excluded.
    pub c: f64,
    pub gradient_tolerance: f64,
    pub max_iterations: usize,
}

impl Default for StackingConfig {
    fn default() -> Self {
        Self {
            c: 1.0,
            gradient_tolerance: 1e-6,
            max_iterations: 200,
        }
    }
}

impl StackingModel {
    pub fn with_holdout(mut self, detector_id: impl Into<String>) -> Self {
        self.holdout_detector = Some(detector_id.into());
        self
    }

    pub fn n_detectors(&self) -> usize {
        self.weights.len()
    }

    pub fn score(&self, probs: &[f64]) -> f64 {
        sigmoid(self.intercept + self.weights.iter().zip(probs).map(|(w, p)| w * p).sum::<f64>())
    }
}

/// `σ(intercept + Σ_j w_j p_ij)` per segment.
pub fn weighted_mean(matrix: &PredictionMatrix, model: &StackingModel) -> Result<Vec<f64>> {
    require_non_empty(matrix)?;
    if model.n_detectors() != matrix.n_detectors() {
        return Err(Error::Shape(format!(
            "stacking model has {} weights for {} detectors",
            model.n_detectors(),
            matrix.n_detectors()
        )));
    }
    Ok(matrix.rows().map(|row| model.score(row)).collect())
}

/// Objective `½‖w‖² + c Σ_i [log(1 + e^{z_i}) − y_i z_i]` with `z = b + Xw`.
fn objective(x: &DMatrix<f64>, y: &[f64], theta: &DVector<f64>, c: f64) -> f64 {
    let r = x.ncols() - 1;
    let z = x * theta;
    let data: f64 = z
        .iter()
        .zip(y)
        .map(|(&z, &y)| softplus(z) - y * z)
        .sum();
    0.5 * theta.rows(0, r).norm_squared() + c * data
}

fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

/// L2-regularized logistic regression by damped Newton iterations.
///
/// The design matrix is `[p_1 … p_R, 1]`; the intercept is the last
/// coordinate and is not penalized.
pub fn fit_stacking(matrix: &PredictionMatrix, labels: &[bool], cfg: &StackingConfig) -> Result<StackingModel> {
    require_non_empty(matrix)?;
    if labels.len() != matrix.n_segments() {
        return Err(Error::Shape(format!(
            "{} labels for {} segments",
            labels.len(),
            matrix.n_segments()
        )));
    }
    if labels.iter().all(|&y| y) || labels.iter().all(|&y| !y) {
        return Err(Error::SingleClass("stacking needs both classes".into()));
    }
    if !(cfg.c > 0.0 && cfg.c.is_finite()) {
        return Err(Error::Config(format!("regularization strength {} must be positive", cfg.c)));
    }
    let (n, r) = (matrix.n_segments(), matrix.n_detectors());
    let x = DMatrix::from_fn(n, r + 1, |i, j| if j < r { matrix.prob(i, j) } else { 1.0 });
    let y: Vec<f64> = labels.iter().map(|&b| f64::from(u8::from(b))).collect();
    let mut theta = DVector::zeros(r + 1);
    let mut penalty = DMatrix::identity(r + 1, r + 1);
    penalty[(r, r)] = 0.0;

    for _ in 0..cfg.max_iterations {
        let mu = (&x * &theta).map(sigmoid);
        let resid = DVector::from_iterator(n, mu.iter().zip(&y).map(|(m, y)| m - y));
        let mut grad = x.tr_mul(&resid) * cfg.c;
        for j in 0..r {
            grad[j] += theta[j];
        }
        if grad.norm() < cfg.gradient_tolerance {
            break;
        }
        let s = mu.map(|m| m * (1.0 - m) * cfg.c);
        let weighted = DMatrix::from_fn(n, r + 1, |i, j| x[(i, j)] * s[i]);
        // the small ridge keeps the intercept pivot positive when all s_i vanish
        let hessian = x.tr_mul(&weighted) + &penalty + DMatrix::identity(r + 1, r + 1) * 1e-12;
        let step = match hessian.clone().cholesky() {
            Some(ch) => ch.solve(&grad),
            None => hessian
                .lu()
                .solve(&grad)
                .ok_or_else(|| Error::Shape("singular stacking Hessian".into()))?,
        };
        let f0 = objective(&x, &y, &theta, cfg.c);
        let slope = grad.dot(&step);
        let mut t = 1.0;
        loop {
            let candidate = &theta - &step * t;
            if objective(&x, &y, &candidate, cfg.c) <= f0 - 1e-4 * t * slope || t < 1e-10 {
                theta = candidate;
                break;
            }
            t *= 0.5;
        }
    }
    Ok(StackingModel {
        detector_ids: matrix.detector_ids().to_vec(),
        weights: theta.rows(0, r).iter().copied().collect(),
        intercept: theta[r],
        holdout_detector: None,
    })
}
