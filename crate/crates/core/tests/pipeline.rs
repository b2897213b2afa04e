use std::fs;

use neofuse::aggregation::{
    dawid_skene, fit_stacking, majority_vote, mean_aggregate, weighted_mean, StackingConfig, DS_EPSILON,
    DS_MAX_ITERATIONS,
};
use neofuse::coredata::{
    load_recording, read_annotations, read_predictions, segment_count, write_annotations, write_predictions,
    write_recording, PredictionMatrix, SegmentLabel,
};
use neofuse::detectors::{train_on_features, TrainConfig};
use neofuse::metrics::evaluate_patient;
use neofuse::rng::seeded_rng;
use neofuse::signal::{cut_segments, preprocess};
use neofuse::simulation::{
    eeg_filter, generate_patient, prepare_cohort, read_per_patient_csv, simulate, training_set, CohortSpec,
    SimulationConfig,
};
use tempfile::TempDir;

fn small_cohort(n_patients: usize, duration_s: u32) -> CohortSpec {
    CohortSpec {
        n_patients,
        duration_s,
        ..CohortSpec::default()
    }
}

#[test]
fn recording_and_annotations_round_trip() {
    let tmp = TempDir::new().unwrap();
    let p = generate_patient(&small_cohort(1, 300), 0).unwrap();
    let stem = tmp.path().join("P01");
    write_recording(&stem, &p.recording).unwrap();
    let back = load_recording(stem.with_extension("json")).unwrap();
    assert_eq!(back.patient_id(), p.recording.patient_id());
    assert_eq!(back.channels(), p.recording.channels());
    assert_eq!(back.n_samples(), p.recording.n_samples());
    for (a, b) in back.samples().iter().zip(p.recording.samples()) {
        for (x, y) in a.iter().zip(b) {
            assert_eq!(*x, f64::from(*y as f32));
        }
    }

    let csv = tmp.path().join("annotations.csv");
    write_annotations(&csv, &p.plan.tracks).unwrap();
    assert_eq!(read_annotations(&csv).unwrap(), p.plan.tracks);
}

#[test]
fn cut_matches_the_grid() {
    let p = generate_patient(&small_cohort(1, 300), 0).unwrap();
    let filter = eeg_filter(p.recording.sample_rate_hz()).unwrap();
    let (pre, _) = preprocess(&p.recording, &filter).unwrap();
    let segments = cut_segments(&pre).unwrap();
    assert_eq!(segments.len(), segment_count(300));
    assert!(segments.iter().all(|s| matches!(s.label, SegmentLabel::Unlabeled | SegmentLabel::Excluded)));
}

#[test]
fn detectors_fuse_and_evaluate_on_a_held_out_patient() {
    let data = prepare_cohort(&small_cohort(4, 900)).unwrap();
    let cfg = TrainConfig {
        epochs: 5,
        ..TrainConfig::default()
    };
    let detectors: Vec<_> = [[0usize, 1], [1, 2]]
        .iter()
        .enumerate()
        .map(|(d, subset)| {
            let mut rng = seeded_rng(d as u64);
            let patients: Vec<_> = subset.iter().map(|&i| &data[i]).collect();
            let (x, y) = training_set(&patients, &mut rng).unwrap();
            train_on_features(format!("local{d}"), &x, &y, &cfg, &mut rng).unwrap().model
        })
        .collect();

    let test = &data[3];
    let scored = test.scored_indices();
    let columns: Vec<Vec<Option<f64>>> = detectors.iter().map(|d| test.predict(d).unwrap()).collect();
    let rows: Vec<Vec<f64>> = scored
        .iter()
        .map(|&i| columns.iter().map(|c| c[i].unwrap()).collect())
        .collect();
    let matrix = PredictionMatrix::from_rows(&rows).unwrap();

    let tmp = TempDir::new().unwrap();
    let csv = tmp.path().join("pred.csv");
    write_predictions(&csv, &matrix).unwrap();
    let back = read_predictions(&csv).unwrap();
    assert_eq!(back.n_segments(), matrix.n_segments());
    assert_eq!(back.detector_ids(), matrix.detector_ids());

    let labels: Vec<bool> = scored.iter().map(|&i| test.labels[i].as_binary().unwrap_or(false)).collect();
    let stacking = fit_stacking(&matrix, &labels, &StackingConfig::default()).unwrap();
    let fused = [
        majority_vote(&matrix).unwrap(),
        mean_aggregate(&matrix).unwrap(),
        weighted_mean(&matrix, &stacking).unwrap(),
        dawid_skene(&matrix, DS_EPSILON, DS_MAX_ITERATIONS).unwrap().mu,
    ];
    for scores in &fused {
        assert_eq!(scores.len(), scored.len());
        let mut full = vec![None; test.labels.len()];
        for (&i, &s) in scored.iter().zip(scores) {
            full[i] = Some(s);
        }
        let m = evaluate_patient(&test.patient_id, &test.labels, &full, &test.tracks, 0.5).unwrap();
        for v in [m.se, m.sp, m.sdr].into_iter().flatten() {
            assert!((0.0..=100.0).contains(&v));
        }
        assert!(m.auc.is_some_and(|a| (0.0..=1.0).contains(&a)));
        assert!(m.fd_per_hour >= 0.0 && m.mfdd >= 0.0);
    }
}

#[test]
fn simulate_writes_consistent_tables() {
    let mut config = SimulationConfig::default();
    config.cohort.n_patients = 5;
    config.cohort.duration_s = 600;
    config.experiment.k_values = vec![2];
    config.experiment.runs = 1;
    let tmp = TempDir::new().unwrap();
    let out = simulate(&config, tmp.path()).unwrap();
    for name in ["trend.csv", "per_patient.csv", "institutions.csv", "manifest.json"] {
        assert!(tmp.path().join(name).is_file(), "{name} missing");
    }
    // four schemes and the local average per k, plus the baseline
    assert_eq!(out.per_patient.len(), 5 * (4 + 1 + 1));
    assert_eq!(read_per_patient_csv(tmp.path().join("per_patient.csv")).unwrap().len(), out.per_patient.len());
    let ds_files = fs::read_dir(tmp.path().join("ds_params")).unwrap().count();
    assert_eq!(ds_files, 5);
}
