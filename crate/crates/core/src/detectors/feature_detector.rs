//! Trainable detector: per-channel features, channel attention, logistic head.

use std::fs;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::attention::{attention_forward, backward, AttentionParams};
use super::features::{FeatureExtractor, Standardizer, FEATURE_NAMES, N_FEATURES};
use super::DetectorModel;
use crate::coredata::Segment;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub learning_rate: f64,
    /// The learning rate halves after every this many epochs.
    pub halve_every: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub inner_size: usize,
    /// Parameters start uniform in `[-init_scale, init_scale]`.
    pub init_scale: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_eps: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 0.001,
            halve_every: 10,
            epochs: 30,
            batch_size: 32,
            inner_size: 8,
            init_scale: 0.1,
            beta1: 0.9,
            beta2: 0.999,
            adam_eps: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureDetector {
    pub detector_id: String,
    pub standardizer: Standardizer,
    pub attention: AttentionParams,
    pub output_weights: DVector<f64>,
    pub output_bias: f64,
}

#[derive(Debug, Clone)]
pub struct TrainedDetector {
    pub model: FeatureDetector,
    pub initial_loss: f64,
    pub final_loss: f64,
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Binary cross-entropy from the logit, stable for large |z|.
fn bce_from_logit(z: f64, y: f64) -> f64 {
    z.max(0.0) - z * y + (-z.abs()).exp().ln_1p()
}

impl FeatureDetector {
    fn logit(&self, standardized: &DMatrix<f64>) -> Result<(f64, super::attention::AttentionForward)> {
        let fwd = attention_forward(standardized, &self.attention)?;
        Ok((self.output_bias + self.output_weights.dot(&fwd.pooled), fwd))
    }

    /// Probability from raw (unstandardized) channel × feature rows.
    pub fn predict_features(&self, raw: &DMatrix<f64>) -> Result<f64> {
        let (z, _) = self.logit(&self.standardizer.apply(raw))?;
        let p = sigmoid(z);
        Ok(if p.is_nan() { 0.5 } else { p })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let json = serde_json::to_string_pretty(&ModelFile::from(self))?;
        fs::write(path, json).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let file: ModelFile = serde_json::from_str(&text)?;
        file.try_into()
    }
}

impl DetectorModel for FeatureDetector {
    fn detector_id(&self) -> &str {
        &self.detector_id
    }

    fn predict(&self, segment: &Segment) -> Result<f64> {
        let raw = FeatureExtractor::default().extract(segment)?;
        self.predict_features(&raw)
    }
}

/// JSON model document. Matrices are stored row by row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    pub detector_id: String,
    pub features: Vec<String>,
    pub inner_size: usize,
    pub standardizer: Standardizer,
    pub attention_v: Vec<Vec<f64>>,
    pub attention_w: Vec<f64>,
    pub output_weights: Vec<f64>,
    pub output_bias: f64,
}

impl From<&FeatureDetector> for ModelFile {
    fn from(m: &FeatureDetector) -> Self {
        ModelFile {
            detector_id: m.detector_id.clone(),
            features: FEATURE_NAMES.iter().map(|s| s.to_string()).collect(),
            inner_size: m.attention.inner_size(),
            standardizer: m.standardizer.clone(),
            attention_v: m.attention.v.row_iter().map(|r| r.iter().copied().collect()).collect(),
            attention_w: m.attention.w.iter().copied().collect(),
            output_weights: m.output_weights.iter().copied().collect(),
            output_bias: m.output_bias,
        }
    }
}

impl TryFrom<ModelFile> for FeatureDetector {
    type Error = Error;

    fn try_from(f: ModelFile) -> Result<Self> {
        if f.features != FEATURE_NAMES {
            return Err(Error::Shape(format!("unsupported feature list {:?}", f.features)));
        }
        let l = N_FEATURES;
        if f.attention_v.len() != l || f.attention_v.iter().any(|r| r.len() != f.inner_size) {
            return Err(Error::Shape(format!("attention V must be {l}×{}", f.inner_size)));
        }
        if f.standardizer.mean.len() != l || f.standardizer.std.len() != l || f.output_weights.len() != l {
            return Err(Error::Shape(format!("standardizer and output weights must have length {l}")));
        }
        let v = DMatrix::from_fn(l, f.inner_size, |r, c| f.attention_v[r][c]);
        let attention = AttentionParams::new(v, DVector::from_vec(f.attention_w))?;
        Ok(FeatureDetector {
            detector_id: f.detector_id,
            standardizer: f.standardizer,
            attention,
            output_weights: DVector::from_vec(f.output_weights),
            output_bias: f.output_bias,
        })
    }
}

/// Flat parameter vector: V (column-major), w, output weights, bias.
struct Layout {
    l: usize,
    h: usize,
}

impl Layout {
    fn len(&self) -> usize {
        self.l * self.h + self.h + self.l + 1
    }

    fn unpack(&self, theta: &[f64]) -> (AttentionParams, DVector<f64>, f64) {
        let lh = self.l * self.h;
        let v = DMatrix::from_column_slice(self.l, self.h, &theta[..lh]);
        let w = DVector::from_column_slice(&theta[lh..lh + self.h]);
        let o = DVector::from_column_slice(&theta[lh + self.h..lh + self.h + self.l]);
        (AttentionParams { v, w }, o, theta[self.len() - 1])
    }
}

struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    fn new(n: usize) -> Self {
        Adam {
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }

    fn step(&mut self, theta: &mut [f64], grad: &[f64], lr: f64, cfg: &TrainConfig) {
        self.t += 1;
        let c1 = 1.0 - cfg.beta1.powi(self.t);
        let c2 = 1.0 - cfg.beta2.powi(self.t);
        for i in 0..theta.len() {
            self.m[i] = cfg.beta1 * self.m[i] + (1.0 - cfg.beta1) * grad[i];
            self.v[i] = cfg.beta2 * self.v[i] + (1.0 - cfg.beta2) * grad[i] * grad[i];
            let m_hat = self.m[i] / c1;
            let v_hat = self.v[i] / c2;
            theta[i] -= lr * m_hat / (v_hat.sqrt() + cfg.adam_eps);
        }
    }
}

fn mean_loss(model: &FeatureDetector, inputs: &[DMatrix<f64>], labels: &[bool]) -> Result<f64> {
    let mut total = 0.0;
    for (x, &y) in inputs.iter().zip(labels) {
        let (z, _) = model.logit(x)?;
        total += bce_from_logit(z, f64::from(u8::from(y)));
    }
    Ok(total / inputs.len() as f64)
}

/// Trains on precomputed raw feature matrices (channels × features).
pub fn train_on_features<R: Rng + ?Sized>(
    detector_id: impl Into<String>,
    features: &[DMatrix<f64>],
    labels: &[bool],
    cfg: &TrainConfig,
    rng: &mut R,
) -> Result<TrainedDetector> {
    if features.len() != labels.len() {
        return Err(Error::Shape(format!(
            "{} feature matrices for {} labels",
            features.len(),
            labels.len()
        )));
    }
    let positives = labels.iter().filter(|&&y| y).count();
    if positives == 0 || positives == labels.len() {
        return Err(Error::SingleClass(format!(
            "training set has {positives} seizure and {} non-seizure segments",
            labels.len() - positives
        )));
    }
    if cfg.batch_size == 0 || cfg.inner_size == 0 {
        return Err(Error::Config("batch size and inner size must be positive".into()));
    }
    let standardizer = Standardizer::fit(features)?;
    let inputs: Vec<DMatrix<f64>> = features.iter().map(|m| standardizer.apply(m)).collect();
    let layout = Layout {
        l: standardizer.mean.len(),
        h: cfg.inner_size,
    };

    let mut theta: Vec<f64> = (0..layout.len())
        .map(|_| rng.random_range(-cfg.init_scale..=cfg.init_scale))
        .collect();
    *theta.last_mut().expect("layout is non-empty") = 0.0;

    let build = |theta: &[f64]| {
        let (attention, output_weights, output_bias) = layout.unpack(theta);
        FeatureDetector {
            detector_id: String::new(),
            standardizer: standardizer.clone(),
            attention,
            output_weights,
            output_bias,
        }
    };
    let initial_loss = mean_loss(&build(&theta), &inputs, labels)?;

    let mut adam = Adam::new(theta.len());
    let mut order: Vec<usize> = (0..inputs.len()).collect();
    let mut grad = vec![0.0; theta.len()];
    let lh = layout.l * layout.h;
    for epoch in 0..cfg.epochs {
        let lr = cfg.learning_rate * 0.5f64.powi((epoch / cfg.halve_every.max(1)) as i32);
        order.shuffle(rng);
        for batch in order.chunks(cfg.batch_size) {
            let (att, out_w, out_b) = layout.unpack(&theta);
            grad.iter_mut().for_each(|g| *g = 0.0);
            for &i in batch {
                let x = &inputs[i];
                let fwd = attention_forward(x, &att)?;
                let z = out_b + out_w.dot(&fwd.pooled);
                let dz = sigmoid(z) - f64::from(u8::from(labels[i]));
                let upstream = &out_w * dz;
                let g = backward(x, &att, &fwd, &upstream);
                for (dst, src) in grad[..lh].iter_mut().zip(g.v.iter()) {
                    *dst += src;
                }
                for (dst, src) in grad[lh..lh + layout.h].iter_mut().zip(g.w.iter()) {
                    *dst += src;
                }
                for (dst, src) in grad[lh + layout.h..lh + layout.h + layout.l]
                    .iter_mut()
                    .zip(fwd.pooled.iter())
                {
                    *dst += dz * src;
                }
                grad[layout.len() - 1] += dz;
            }
            let scale = 1.0 / batch.len() as f64;
            grad.iter_mut().for_each(|g| *g *= scale);
            adam.step(&mut theta, &grad, lr, cfg);
        }
    }

    let mut model = build(&theta);
    model.detector_id = detector_id.into();
    let final_loss = mean_loss(&model, &inputs, labels)?;
    Ok(TrainedDetector {
        model,
        initial_loss,
        final_loss,
    })
}

/// Trains on SEIZURE / NONSEIZURE segments. The caller balances the set.
pub fn train_feature_detector<R: Rng + ?Sized>(
    detector_id: impl Into<String>,
    segments: &[Segment],
    cfg: &TrainConfig,
    rng: &mut R,
) -> Result<TrainedDetector> {
    let extractor = FeatureExtractor::default();
    let mut features = Vec::with_capacity(segments.len());
    let mut labels = Vec::with_capacity(segments.len());
    for s in segments {
        let y = s.label.as_binary().ok_or_else(|| {
            Error::InvalidAnnotation(format!("segment {} is {:?}, not trainable", s.id(), s.label))
        })?;
        features.push(extractor.extract(s)?);
        labels.push(y);
    }
    train_on_features(detector_id, &features, &labels, cfg, rng)
}
