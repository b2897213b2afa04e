//! Leave-one-subject-out evaluation of local detectors, their fusions and a
//! baseline trained on all remaining patients.

use nalgebra::DMatrix;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::partition::{partition_patients, MIN_PATIENTS_PER_SUBSET};
use crate::aggregation::{
    dawid_skene, fit_stacking, majority_vote, mean_aggregate, weighted_mean, DsTheta, Scheme, StackingConfig,
    DS_EPSILON, DS_MAX_ITERATIONS,
};
use crate::coredata::{segment_id, AnnotationTrack, PredictionMatrix, Recording, SegmentLabel, LABEL_THRESHOLD, SEGMENT_STEP_S};
use crate::detectors::{train_on_features, FeatureDetector, FeatureExtractor, TrainConfig};
use crate::error::{Error, Result};
use crate::metrics::{evaluate_patient, PatientMetrics};
use crate::rng::derived_rng;
use crate::signal::{balance_indices, preprocess, segment_recording, IirFilter};

const PARTITION_STREAM: u64 = 1;
const LOCAL_STREAM: u64 = 2;
const BASELINE_STREAM: u64 = 3;
const STACKING_STREAM: u64 = 4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub k_values: Vec<usize>,
    pub runs: usize,
    pub min_patients_per_subset: usize,
    pub schemes: Vec<Scheme>,
    pub tau: f64,
    pub ds_epsilon: f64,
    pub ds_max_iterations: usize,
    pub train: TrainConfig,
    pub stacking: StackingConfig,
    pub seed: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            k_values: vec![3, 4, 5],
            runs: 3,
            min_patients_per_subset: 2,
            schemes: Scheme::ALL.to_vec(),
            tau: LABEL_THRESHOLD,
            ds_epsilon: DS_EPSILON,
            ds_max_iterations: DS_MAX_ITERATIONS,
            train: TrainConfig::default(),
            stacking: StackingConfig::default(),
            seed: 7,
        }
    }
}

impl ExperimentConfig {
    /// k = 3..10, ten runs, at least three patients per subset.
    pub fn full_grid() -> Self {
        ExperimentConfig {
            k_values: (3..=10).collect(),
            runs: 10,
            min_patients_per_subset: MIN_PATIENTS_PER_SUBSET,
            ..ExperimentConfig::default()
        }
    }

    pub fn validate(&self, n_patients: usize) -> Result<()> {
        if self.runs == 0 || self.k_values.is_empty() || self.schemes.is_empty() {
            return Err(Error::Config("runs, k values and schemes must be non-empty".into()));
        }
        if !(0.0..=1.0).contains(&self.tau) {
            return Err(Error::Config(format!("threshold {} must lie in [0, 1]", self.tau)));
        }
        if n_patients < 2 {
            return Err(Error::Config("leave-one-subject-out needs at least two patients".into()));
        }
        let available = n_patients - 1;
        for &k in &self.k_values {
            if k == 0 || k * self.min_patients_per_subset.max(1) > available {
                return Err(Error::Partition {
                    patients: available,
                    subsets: k,
                    min_size: self.min_patients_per_subset.max(1),
                });
            }
        }
        Ok(())
    }
}

/// One preprocessed recording reduced to per-segment features.
#[derive(Debug, Clone)]
pub struct PatientData {
    pub patient_id: String,
    pub tracks: Vec<AnnotationTrack>,
    pub labels: Vec<SegmentLabel>,
    /// Raw channel × feature matrices; `None` for excluded segments.
    pub features: Vec<Option<DMatrix<f64>>>,
}

impl PatientData {
    pub fn from_recording(rec: &Recording, tracks: Vec<AnnotationTrack>, filter: &IirFilter) -> Result<Self> {
        let (pre, _) = preprocess(rec, filter)?;
        let segments = segment_recording(&pre, &tracks)?;
        let extractor = FeatureExtractor::default();
        let features = segments
            .iter()
            .map(|s| {
                if s.label == SegmentLabel::Excluded {
                    Ok(None)
                } else {
                    extractor.extract(s).map(Some)
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(PatientData {
            patient_id: rec.patient_id().to_string(),
            tracks,
            labels: segments.iter().map(|s| s.label).collect(),
            features,
        })
    }

    pub fn scored_indices(&self) -> Vec<usize> {
        (0..self.features.len()).filter(|&i| self.features[i].is_some()).collect()
    }

    fn trainable(&self) -> impl Iterator<Item = (&DMatrix<f64>, bool)> {
        self.labels
            .iter()
            .zip(&self.features)
            .filter_map(|(l, f)| Some((f.as_ref()?, l.as_binary()?)))
    }

    /// Scores for every segment of this patient; excluded segments stay `None`.
    pub fn predict(&self, detector: &FeatureDetector) -> Result<Vec<Option<f64>>> {
        self.features
            .iter()
            .map(|f| f.as_ref().map(|x| detector.predict_features(x)).transpose())
            .collect()
    }
}

/// Class-balanced union of the patients' trainable segments.
pub fn training_set<R: Rng + ?Sized>(patients: &[&PatientData], rng: &mut R) -> Result<(Vec<DMatrix<f64>>, Vec<bool>)> {
    let items: Vec<(&DMatrix<f64>, bool)> = patients.iter().flat_map(|p| p.trainable()).collect();
    let labels: Vec<bool> = items.iter().map(|i| i.1).collect();
    let keep = balance_indices(&labels, rng)?;
    Ok((
        keep.iter().map(|&i| items[i].0.clone()).collect(),
        keep.iter().map(|&i| items[i].1).collect(),
    ))
}

/// Institutions for one fold: patient indices per subset, the left-out patient excluded.
pub fn fold_subsets(cfg: &ExperimentConfig, run: usize, left_out: usize, n_patients: usize, k: usize) -> Result<Vec<Vec<usize>>> {
    let remaining: Vec<usize> = (0..n_patients).filter(|&p| p != left_out).collect();
    let mut rng = derived_rng(cfg.seed, &[run as u64, left_out as u64, k as u64, PARTITION_STREAM]);
    partition_patients(&remaining, k, cfg.min_patients_per_subset, &mut rng)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DsSummary {
    pub theta: DsTheta,
    pub iterations: usize,
    pub log_likelihood: f64,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KOutcome {
    pub k: usize,
    pub subset_sizes: Vec<usize>,
    /// Local detector whose training data fitted the stacking model.
    pub holdout: Option<usize>,
    pub schemes: Vec<(Scheme, PatientMetrics)>,
    pub local: Vec<PatientMetrics>,
    pub ds: Option<DsSummary>,
}

impl KOutcome {
    pub fn scheme(&self, s: Scheme) -> Option<&PatientMetrics> {
        self.schemes.iter().find(|(k, _)| *k == s).map(|(_, m)| m)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FoldOutcome {
    pub run: usize,
    pub patient_id: String,
    pub baseline: PatientMetrics,
    pub per_k: Vec<KOutcome>,
}

/// Mean of every defined value across detectors.
pub fn average_metrics(patient_id: &str, all: &[PatientMetrics]) -> PatientMetrics {
    let mean = |f: &dyn Fn(&PatientMetrics) -> Option<f64>| {
        let v: Vec<f64> = all.iter().filter_map(f).collect();
        (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
    };
    PatientMetrics {
        patient_id: patient_id.to_string(),
        se: mean(&|m| m.se),
        sp: mean(&|m| m.sp),
        auc: mean(&|m| m.auc),
        sdr: mean(&|m| m.sdr),
        fd_per_hour: mean(&|m| Some(m.fd_per_hour)).unwrap_or(0.0),
        mfdd: mean(&|m| Some(m.mfdd)).unwrap_or(0.0),
    }
}

fn expand(scored: &[usize], n: usize, values: &[f64]) -> Vec<Option<f64>> {
    let mut out = vec![None; n];
    for (&i, &v) in scored.iter().zip(values) {
        out[i] = Some(v);
    }
    out
}

fn evaluate(test: &PatientData, scores: &[Option<f64>], tau: f64) -> Result<PatientMetrics> {
    evaluate_patient(&test.patient_id, &test.labels, scores, &test.tracks, tau)
}

fn run_k(cfg: &ExperimentConfig, data: &[PatientData], run: usize, left_out: usize, k: usize) -> Result<KOutcome> {
    let test = &data[left_out];
    let subsets = fold_subsets(cfg, run, left_out, data.len(), k)?;
    let scored = test.scored_indices();
    let n_seg = test.labels.len();

    let mut detectors = Vec::with_capacity(k);
    let mut train_sets = Vec::with_capacity(k);
    for (j, subset) in subsets.iter().enumerate() {
        let members: Vec<&PatientData> = subset.iter().map(|&p| &data[p]).collect();
        let mut rng = derived_rng(cfg.seed, &[run as u64, left_out as u64, k as u64, LOCAL_STREAM, j as u64]);
        let (xs, ys) = training_set(&members, &mut rng)?;
        let trained = train_on_features(format!("local{j}"), &xs, &ys, &cfg.train, &mut rng)?;
        detectors.push(trained.model);
        train_sets.push((xs, ys));
    }

    let columns: Vec<Vec<f64>> = detectors
        .iter()
        .map(|d| scored.iter().map(|&i| d.predict_features(test.features[i].as_ref().expect("scored"))).collect())
        .collect::<Result<_>>()?;
    let probs: Vec<f64> = (0..scored.len())
        .flat_map(|i| columns.iter().map(move |c| c[i]))
        .collect();
    let matrix = PredictionMatrix::new(
        scored.iter().map(|&i| segment_id(&test.patient_id, (SEGMENT_STEP_S as usize * i) as u32)).collect(),
        detectors.iter().map(|d| d.detector_id.clone()).collect(),
        probs,
    )?;

    let local = columns
        .iter()
        .map(|c| evaluate(test, &expand(&scored, n_seg, c), cfg.tau))
        .collect::<Result<Vec<_>>>()?;

    let mut schemes = Vec::new();
    let mut ds = None;
    let mut holdout = None;
    for &scheme in &cfg.schemes {
        let fused = match scheme {
            Scheme::Mv => majority_vote(&matrix)?,
            Scheme::Mean => mean_aggregate(&matrix)?,
            Scheme::Ds => {
                let state = dawid_skene(&matrix, cfg.ds_epsilon, cfg.ds_max_iterations)?;
                ds = Some(DsSummary {
                    iterations: state.iterations,
                    log_likelihood: state.final_log_likelihood(),
                    converged: state.converged,
                    theta: state.theta,
                });
                state.mu
            }
            Scheme::Wmean => {
                if k < 2 {
                    continue;
                }
                let mut rng = derived_rng(cfg.seed, &[run as u64, left_out as u64, k as u64, STACKING_STREAM]);
                let h = rng.random_range(0..k);
                holdout = Some(h);
                let others: Vec<usize> = (0..k).filter(|&j| j != h).collect();
                let (xs, ys) = &train_sets[h];
                let detectors = &detectors;
                let stack_probs: Vec<f64> = xs
                    .iter()
                    .flat_map(|x| others.iter().map(move |&j| detectors[j].predict_features(x)))
                    .collect::<Result<_>>()?;
                let stack_matrix = PredictionMatrix::new(
                    (0..xs.len()).map(|i| i.to_string()).collect(),
                    others.iter().map(|&j| detectors[j].detector_id.clone()).collect(),
                    stack_probs,
                )?;
                let model = fit_stacking(&stack_matrix, ys, &cfg.stacking)?.with_holdout(detectors[h].detector_id.clone());
                weighted_mean(&matrix.select_detectors(&others)?, &model)?
            }
        };
        schemes.push((scheme, evaluate(test, &expand(&scored, n_seg, &fused), cfg.tau)?));
    }

    Ok(KOutcome {
        k,
        subset_sizes: subsets.iter().map(Vec::len).collect(),
        holdout,
        schemes,
        local,
        ds,
    })
}

fn run_fold(cfg: &ExperimentConfig, data: &[PatientData], run: usize, left_out: usize) -> Result<FoldOutcome> {
    let test = &data[left_out];
    let others: Vec<&PatientData> = (0..data.len()).filter(|&p| p != left_out).map(|p| &data[p]).collect();
    let mut rng = derived_rng(cfg.seed, &[run as u64, left_out as u64, 0, BASELINE_STREAM]);
    let (xs, ys) = training_set(&others, &mut rng)?;
    let baseline = train_on_features("baseline", &xs, &ys, &cfg.train, &mut rng)?.model;
    let baseline = evaluate(test, &test.predict(&baseline)?, cfg.tau)?;
    let per_k = cfg
        .k_values
        .iter()
        .map(|&k| run_k(cfg, data, run, left_out, k))
        .collect::<Result<Vec<_>>>()?;
    Ok(FoldOutcome {
        run,
        patient_id: test.patient_id.clone(),
        baseline,
        per_k,
    })
}

/// Every (run, left-out patient) fold, computed in parallel and returned in
/// run-major, patient-minor order.
pub fn run_loso(data: &[PatientData], cfg: &ExperimentConfig) -> Result<Vec<FoldOutcome>> {
    cfg.validate(data.len())?;
    let tasks: Vec<(usize, usize)> = (0..cfg.runs).flat_map(|r| (0..data.len()).map(move |p| (r, p))).collect();
    tasks
        .into_par_iter()
        .map(|(run, p)| run_fold(cfg, data, run, p))
        .collect()
}
