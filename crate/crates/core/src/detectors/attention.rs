//! Channel attention pooling.
//!
//! For channel rows `x_k` (length L) the score is `s_k = wᵀ tanh(Vᵀ x_k)`
//! with `V` of shape L × H and `w` of length H. Weights are the softmax of
//! the scores over channels and the output is `Σ_k a_k x_k`.

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct AttentionParams {
    /// L × H.
    pub v: DMatrix<f64>,
    /// H.
    pub w: DVector<f64>,
}

impl AttentionParams {
    pub fn new(v: DMatrix<f64>, w: DVector<f64>) -> Result<Self> {
        if v.ncols() != w.len() {
            return Err(Error::Shape(format!(
                "V is {}×{} but w has length {}",
                v.nrows(),
                v.ncols(),
                w.len()
            )));
        }
        if v.iter().chain(w.iter()).any(|x| !x.is_finite()) {
            return Err(Error::Shape("attention parameters must be finite".into()));
        }
        Ok(AttentionParams { v, w })
    }

    /// Uniform in `[-scale, scale]`.
    pub fn random<R: Rng + ?Sized>(features: usize, inner: usize, scale: f64, rng: &mut R) -> Self {
        let v = DMatrix::from_fn(features, inner, |_, _| rng.random_range(-scale..=scale));
        let w = DVector::from_fn(inner, |_, _| rng.random_range(-scale..=scale));
        AttentionParams { v, w }
    }

    pub fn feature_len(&self) -> usize {
        self.v.nrows()
    }

    pub fn inner_size(&self) -> usize {
        self.v.ncols()
    }
}

/// Forward pass with the intermediates the backward pass needs.
#[derive(Debug, Clone)]
pub struct AttentionForward {
    pub pooled: DVector<f64>,
    /// Softmax weights, one per channel.
    pub weights: DVector<f64>,
    /// C × H matrix of `tanh(Vᵀ x_k)` rows.
    pub hidden: DMatrix<f64>,
}

#[derive(Debug, Clone)]
pub struct AttentionGrads {
    pub v: DMatrix<f64>,
    pub w: DVector<f64>,
    pub features: DMatrix<f64>,
}

fn check_shapes(features: &DMatrix<f64>, params: &AttentionParams) -> Result<()> {
    if features.nrows() == 0 {
        return Err(Error::Shape("attention needs at least one channel".into()));
    }
    if features.ncols() != params.feature_len() {
        return Err(Error::Shape(format!(
            "features have length {} but V expects {}",
            features.ncols(),
            params.feature_len()
        )));
    }
    Ok(())
}

pub fn attention_forward(features: &DMatrix<f64>, params: &AttentionParams) -> Result<AttentionForward> {
    check_shapes(features, params)?;
    let hidden = (features * &params.v).map(f64::tanh);
    let scores = &hidden * &params.w;
    let max = scores.max();
    let exp = scores.map(|s| (s - max).exp());
    let weights = &exp / exp.sum();
    let pooled = features.tr_mul(&weights);
    Ok(AttentionForward {
        pooled,
        weights,
        hidden,
    })
}

pub fn attention_pool(features: &DMatrix<f64>, params: &AttentionParams) -> Result<DVector<f64>> {
    Ok(attention_forward(features, params)?.pooled)
}

/// Gradients of `upstreamᵀ · pool(features)` with respect to V, w and the features.
pub fn attention_grad(
    features: &DMatrix<f64>,
    params: &AttentionParams,
    upstream: &DVector<f64>,
) -> Result<AttentionGrads> {
    let fwd = attention_forward(features, params)?;
    if upstream.len() != features.ncols() {
        return Err(Error::Shape(format!(
            "upstream gradient has length {} but output has {}",
            upstream.len(),
            features.ncols()
        )));
    }
    Ok(backward(features, params, &fwd, upstream))
}

pub(crate) fn backward(
    features: &DMatrix<f64>,
    params: &AttentionParams,
    fwd: &AttentionForward,
    upstream: &DVector<f64>,
) -> AttentionGrads {
    let a = &fwd.weights;
    // dL/da_k = g·x_k ; softmax backward gives ds_k = a_k (g·x_k - g·out)
    let gx = features * upstream;
    let g_out = upstream.dot(&fwd.pooled);
    let ds = DVector::from_fn(a.len(), |k, _| a[k] * (gx[k] - g_out));
    let grad_w = fwd.hidden.tr_mul(&ds);
    // du_k = ds_k · w ⊙ (1 - h_k²), rows of a C × H matrix
    let du = DMatrix::from_fn(fwd.hidden.nrows(), fwd.hidden.ncols(), |k, h| {
        let t = fwd.hidden[(k, h)];
        ds[k] * params.w[h] * (1.0 - t * t)
    });
    let grad_v = features.tr_mul(&du);
    let mut grad_x = &du * params.v.transpose();
    for k in 0..grad_x.nrows() {
        for l in 0..grad_x.ncols() {
            grad_x[(k, l)] += a[k] * upstream[l];
        }
    }
    AttentionGrads {
        v: grad_v,
        w: grad_w,
        features: grad_x,
    }
}
