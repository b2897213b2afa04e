use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use neofuse::aggregation::{
    dawid_skene, fit_stacking, majority_vote, mean_aggregate, threshold_labels, weighted_mean, Scheme,
    StackingConfig, StackingModel,
};
use neofuse::coredata::io::format_prob;
use neofuse::coredata::{
    load_recording, parse_segment_id, read_annotations, read_predictions, segment_count, segment_id,
    write_annotations, write_predictions, write_recording, AnnotationTrack, PredictionMatrix, SegmentLabel,
    SEGMENT_STEP_S,
};
use neofuse::detectors::{train_on_features, FeatureDetector, FeatureExtractor, TrainConfig};
use neofuse::metrics::{evaluate_patient, summarize_patients, PatientMetrics, Summary};
use neofuse::rng::seeded_rng;
use neofuse::signal::{cut_segments, design_from, preprocess, segment_recording, window_label, FilterDesign};
use neofuse::simulation::{
    eeg_filter, generate_patient, read_per_patient_csv, simulate, trend_report, training_set, write_trend_csv,
    CohortSpec, PatientData, SimulationConfig, ALL_K, BASELINE,
};

use crate::output::{create_dir, parent_dir, record, resolve, write_json};
use crate::{
    AggregateArgs, Command, EvaluateArgs, FilterDesignArgs, GenerateArgs, PredictArgs, ReportArgs, SegmentArgs,
    SimulateArgs, TrainArgs,
};

pub fn run(command: Command, verbose: bool) -> Result<()> {
    match command {
        Command::FilterDesign(a) => filter_design(a, verbose),
        Command::Segment(a) => segment(a, verbose),
        Command::Train(a) if a.pred.is_some() => train_stacking(a, verbose),
        Command::Train(a) => train(a, verbose),
        Command::Predict(a) => predict(a, verbose),
        Command::Aggregate(a) => aggregate(a, verbose),
        Command::Evaluate(a) => evaluate(a, verbose),
        Command::Simulate(a) => run_simulation(a, verbose),
        Command::Report(a) => report(a, verbose),
        Command::Generate(a) => generate(a, verbose),
    }
}

fn csv_writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    csv::Writer::from_path(path).with_context(|| format!("cannot write {}", path.display()))
}

fn load_tracks(paths: &[PathBuf]) -> Result<Vec<AnnotationTrack>> {
    let mut all = Vec::new();
    for p in paths {
        all.extend(read_annotations(p).with_context(|| format!("cannot read annotations {}", p.display()))?);
    }
    Ok(all)
}

fn tracks_of(all: &[AnnotationTrack], patient_id: &str) -> Vec<AnnotationTrack> {
    all.iter().filter(|t| t.patient_id == patient_id).cloned().collect()
}

fn label_name(label: SegmentLabel) -> &'static str {
    match label {
        SegmentLabel::Seizure => "seizure",
        SegmentLabel::Nonseizure => "nonseizure",
        SegmentLabel::Mixed => "mixed",
        SegmentLabel::Disagreement => "disagreement",
        SegmentLabel::Excluded => "excluded",
        SegmentLabel::Unlabeled => "unlabeled",
    }
}

fn filter_design(a: FilterDesignArgs, verbose: bool) -> Result<()> {
    let dir = resolve(a.out, "filter");
    let design = FilterDesign {
        order: a.order,
        f_low_hz: a.low,
        f_high_hz: a.high,
        stopband_atten_db: a.atten,
        sample_rate_hz: a.rate,
    };
    let filter = design_from(design)?;
    create_dir(&dir)?;

    let sos_path = dir.join("sos.csv");
    let mut w = csv_writer(&sos_path)?;
    w.write_record(["section", "b0", "b1", "b2", "a0", "a1", "a2"])?;
    for (i, s) in filter.sections().iter().enumerate() {
        w.write_record([
            i.to_string(),
            format_prob(s.b0),
            format_prob(s.b1),
            format_prob(s.b2),
            format_prob(1.0),
            format_prob(s.a1),
            format_prob(s.a2),
        ])?;
    }
    w.flush()?;

    let resp_path = dir.join("response.csv");
    let mut w = csv_writer(&resp_path)?;
    w.write_record(["freq_hz", "magnitude", "magnitude_db"])?;
    let points = a.points.max(2);
    let nyquist = a.rate / 2.0;
    for i in 0..points {
        let f = nyquist * i as f64 / (points - 1) as f64;
        w.write_record([format!("{f:.6}"), format_prob(filter.magnitude(f)), format!("{:.6}", filter.magnitude_db(f))])?;
    }
    w.flush()?;

    let max_pole = filter.poles().iter().map(|p| p.norm()).fold(0.0, f64::max);
    if verbose {
        eprintln!("{} sections, largest pole magnitude {max_pole:.6}", filter.sections().len());
    }
    record(
        &dir,
        "filter-design",
        json!({ "design": design, "points": points, "max_pole_magnitude": max_pole }),
        &[],
        &[&sos_path, &resp_path],
    )
}

fn segment(a: SegmentArgs, verbose: bool) -> Result<()> {
    let dir = resolve(a.out, "segments");
    let rec = load_recording(&a.recording).with_context(|| format!("cannot load recording {}", a.recording.display()))?;
    let tracks = tracks_of(&load_tracks(std::slice::from_ref(&a.annotations))?, rec.patient_id());
    let filter = eeg_filter(rec.sample_rate_hz())?;
    let (pre, clipped) = preprocess(&rec, &filter)?;
    let segments = segment_recording(&pre, &tracks)?;
    create_dir(&dir)?;

    let path = dir.join("segments.csv");
    let mut w = csv_writer(&path)?;
    w.write_record(["segment_id", "start_s", "label"])?;
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for s in &segments {
        let name = label_name(s.label);
        *counts.entry(name).or_default() += 1;
        w.write_record([s.id(), s.start_s.to_string(), name.to_string()])?;
    }
    w.flush()?;
    if verbose {
        eprintln!("{} segments {counts:?}", segments.len());
    }
    record(
        &dir,
        "segment",
        json!({ "patient_id": rec.patient_id(), "clipped_samples": clipped, "label_counts": counts }),
        &[&a.recording, &a.annotations],
        &[&path],
    )
}

fn train_config(a: &TrainArgs) -> TrainConfig {
    TrainConfig {
        learning_rate: a.lr,
        epochs: a.epochs,
        batch_size: a.batch_size,
        inner_size: a.inner_size,
        ..TrainConfig::default()
    }
}

fn train(a: TrainArgs, verbose: bool) -> Result<()> {
    let path = resolve(a.out.clone(), "model.json");
    let tracks = load_tracks(&a.annotations)?;
    let patients = a
        .recording
        .par_iter()
        .map(|p| {
            let rec = load_recording(p).with_context(|| format!("cannot load recording {}", p.display()))?;
            let filter = eeg_filter(rec.sample_rate_hz())?;
            let own = tracks_of(&tracks, rec.patient_id());
            PatientData::from_recording(&rec, own, &filter).with_context(|| format!("cannot segment {}", p.display()))
        })
        .collect::<Result<Vec<_>>>()?;
    let cfg = train_config(&a);
    let mut rng = seeded_rng(a.seed);
    let refs: Vec<&PatientData> = patients.iter().collect();
    let (xs, ys) = training_set(&refs, &mut rng)?;
    let trained = train_on_features(a.id.clone(), &xs, &ys, &cfg, &mut rng)?;
    if verbose {
        eprintln!(
            "{} balanced segments, loss {:.4} -> {:.4}",
            xs.len(),
            trained.initial_loss,
            trained.final_loss
        );
    }
    let dir = parent_dir(&path)?;
    trained.model.save(&path)?;
    let inputs: Vec<&Path> = a.recording.iter().chain(&a.annotations).map(PathBuf::as_path).collect();
    record(
        &dir,
        "train",
        json!({
            "id": a.id,
            "seed": a.seed,
            "learning_rate": cfg.learning_rate,
            "halve_every": cfg.halve_every,
            "epochs": cfg.epochs,
            "batch_size": cfg.batch_size,
            "inner_size": cfg.inner_size,
            "training_segments": xs.len(),
            "final_loss": trained.final_loss,
        }),
        &inputs,
        &[&path],
    )
}

/// Rows of `m` restricted to `rows`, in that order.
fn select_rows(m: &PredictionMatrix, rows: &[usize]) -> Result<PredictionMatrix> {
    let ids = rows.iter().map(|&i| m.segment_ids()[i].clone()).collect();
    let probs = rows.iter().flat_map(|&i| m.row(i).iter().copied()).collect();
    Ok(PredictionMatrix::new(ids, m.detector_ids().to_vec(), probs)?)
}

fn parse_id(id: &str) -> Result<(&str, u32)> {
    parse_segment_id(id).ok_or_else(|| anyhow!("segment id {id:?} is not of the form <patient>:<start_s>"))
}

fn train_stacking(a: TrainArgs, verbose: bool) -> Result<()> {
    let pred = a.pred.clone().expect("stacking mode");
    let path = resolve(a.out.clone(), "stacking.json");
    let matrix = read_predictions(&pred).with_context(|| format!("cannot read predictions {}", pred.display()))?;
    let tracks = load_tracks(&a.annotations)?;
    let mut by_patient: HashMap<&str, Vec<AnnotationTrack>> = HashMap::new();
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for (i, id) in matrix.segment_ids().iter().enumerate() {
        let (pid, start) = parse_id(id)?;
        let own = by_patient.entry(pid).or_insert_with(|| tracks_of(&tracks, pid));
        if own.is_empty() {
            bail!("no annotations for patient {pid} in {}", pred.display());
        }
        let end = start as usize + neofuse::coredata::SEGMENT_DURATION_S as usize;
        if own.iter().any(|t| t.len() < end) {
            bail!("annotations for {pid} end before segment {id}");
        }
        if let Some(y) = window_label(own, start as usize).as_binary() {
            rows.push(i);
            labels.push(y);
        }
    }
    let cfg = StackingConfig {
        c: a.c,
        ..StackingConfig::default()
    };
    let model = fit_stacking(&select_rows(&matrix, &rows)?, &labels, &cfg)?;
    if verbose {
        eprintln!("{} labeled segments, weights {:?}", rows.len(), model.weights);
    }
    let dir = parent_dir(&path)?;
    write_json(&path, &model)?;
    let mut inputs: Vec<&Path> = vec![&pred];
    inputs.extend(a.annotations.iter().map(PathBuf::as_path));
    record(
        &dir,
        "train-stacking",
        json!({ "stacking": cfg, "labeled_segments": rows.len() }),
        &inputs,
        &[&path],
    )
}

fn predict(a: PredictArgs, verbose: bool) -> Result<()> {
    let path = resolve(a.out, "predictions.csv");
    let models = a
        .model
        .iter()
        .map(|p| FeatureDetector::load(p).with_context(|| format!("cannot load model {}", p.display())))
        .collect::<Result<Vec<_>>>()?;
    let ids: Vec<String> = models.iter().map(|m| m.detector_id.clone()).collect();
    if ids.iter().collect::<BTreeSet<_>>().len() != ids.len() {
        bail!("detector ids must be distinct, got {ids:?}");
    }
    let extractor = FeatureExtractor::default();
    let per_recording = a
        .recording
        .par_iter()
        .map(|p| -> Result<(Vec<String>, Vec<f64>)> {
            let rec = load_recording(p).with_context(|| format!("cannot load recording {}", p.display()))?;
            let filter = eeg_filter(rec.sample_rate_hz())?;
            let (pre, _) = preprocess(&rec, &filter)?;
            let mut seg_ids = Vec::new();
            let mut probs = Vec::new();
            for s in cut_segments(&pre)? {
                if s.label == SegmentLabel::Excluded {
                    continue;
                }
                let x = extractor.extract(&s)?;
                for m in &models {
                    probs.push(m.predict_features(&x)?);
                }
                seg_ids.push(segment_id(&s.patient_id, s.start_s));
            }
            Ok((seg_ids, probs))
        })
        .collect::<Result<Vec<_>>>()?;
    let (seg_ids, probs): (Vec<Vec<String>>, Vec<Vec<f64>>) = per_recording.into_iter().unzip();
    let matrix = PredictionMatrix::new(seg_ids.concat(), ids, probs.concat())?;
    if verbose {
        eprintln!("{} segments x {} detectors", matrix.n_segments(), matrix.n_detectors());
    }
    let dir = parent_dir(&path)?;
    write_predictions(&path, &matrix)?;
    let inputs: Vec<&Path> = a.model.iter().chain(&a.recording).map(PathBuf::as_path).collect();
    record(&dir, "predict", json!({ "segments": matrix.n_segments() }), &inputs, &[&path])
}

#[derive(Serialize)]
struct DsGroup {
    patient_id: Option<String>,
    segments: usize,
    t: f64,
    alpha: Vec<f64>,
    beta: Vec<f64>,
    iterations: usize,
    converged: bool,
    log_likelihood: f64,
}

#[derive(Serialize)]
struct DsParams {
    mode: &'static str,
    epsilon: f64,
    max_iterations: usize,
    detector_ids: Vec<String>,
    groups: Vec<DsGroup>,
}

fn run_ds(m: &PredictionMatrix, patient_id: Option<String>, eps: f64, k_max: usize) -> Result<(Vec<f64>, DsGroup)> {
    let state = dawid_skene(m, eps, k_max)?;
    let group = DsGroup {
        patient_id,
        segments: m.n_segments(),
        t: state.theta.t,
        alpha: state.theta.alpha.clone(),
        beta: state.theta.beta.clone(),
        iterations: state.iterations,
        converged: state.converged,
        log_likelihood: state.final_log_likelihood(),
    };
    Ok((state.mu, group))
}

fn aggregate(a: AggregateArgs, verbose: bool) -> Result<()> {
    let path = resolve(a.out, "consensus.csv");
    if !(0.0..=1.0).contains(&a.tau) {
        bail!("threshold {} must lie in [0, 1]", a.tau);
    }
    let matrix = read_predictions(&a.pred).with_context(|| format!("cannot read predictions {}", a.pred.display()))?;
    let dir = parent_dir(&path)?;
    let mut outputs = vec![path.clone()];
    let scores = match a.scheme {
        Scheme::Mv => majority_vote(&matrix)?,
        Scheme::Mean => mean_aggregate(&matrix)?,
        Scheme::Wmean => {
            let sp = a.stacking.as_ref().expect("required by clap");
            let text = fs::read_to_string(sp).with_context(|| format!("cannot read stacking model {}", sp.display()))?;
            let model: StackingModel =
                serde_json::from_str(&text).with_context(|| format!("malformed stacking model {}", sp.display()))?;
            let columns = model
                .detector_ids
                .iter()
                .map(|id| {
                    matrix
                        .detector_ids()
                        .iter()
                        .position(|d| d == id)
                        .ok_or_else(|| anyhow!("detector {id} of {} is missing from {}", sp.display(), a.pred.display()))
                })
                .collect::<Result<Vec<_>>>()?;
            weighted_mean(&matrix.select_detectors(&columns)?, &model)?
        }
        Scheme::Ds => {
            let (scores, groups) = if a.pooled {
                let (mu, g) = run_ds(&matrix, None, a.eps, a.k_max)?;
                (mu, vec![g])
            } else {
                let mut order: Vec<String> = Vec::new();
                let mut members: HashMap<String, Vec<usize>> = HashMap::new();
                for (i, id) in matrix.segment_ids().iter().enumerate() {
                    let pid = parse_id(id)?.0.to_string();
                    members
                        .entry(pid.clone())
                        .or_insert_with(|| {
                            order.push(pid);
                            Vec::new()
                        })
                        .push(i);
                }
                let fits = order
                    .par_iter()
                    .map(|pid| {
                        let rows = &members[pid];
                        let (mu, g) = run_ds(&select_rows(&matrix, rows)?, Some(pid.clone()), a.eps, a.k_max)?;
                        Ok((rows, mu, g))
                    })
                    .collect::<Result<Vec<_>>>()?;
                let mut scores = vec![0.0; matrix.n_segments()];
                let mut groups = Vec::with_capacity(fits.len());
                for (rows, mu, g) in fits {
                    for (&i, v) in rows.iter().zip(mu) {
                        scores[i] = v;
                    }
                    groups.push(g);
                }
                (scores, groups)
            };
            if verbose {
                for g in &groups {
                    eprintln!(
                        "{}: t {:.4}, {} iterations",
                        g.patient_id.as_deref().unwrap_or("pooled"),
                        g.t,
                        g.iterations
                    );
                }
            }
            let ds_path = dir.join("ds_params.json");
            write_json(
                &ds_path,
                &DsParams {
                    mode: if a.pooled { "pooled" } else { "per_patient" },
                    epsilon: a.eps,
                    max_iterations: a.k_max,
                    detector_ids: matrix.detector_ids().to_vec(),
                    groups,
                },
            )?;
            outputs.push(ds_path);
            scores
        }
    };
    let labels = threshold_labels(&scores, a.tau);
    let mut w = csv_writer(&path)?;
    w.write_record(["segment_id", "score", "label"])?;
    for ((id, s), l) in matrix.segment_ids().iter().zip(&scores).zip(&labels) {
        w.write_record([id.clone(), format_prob(*s), u8::from(*l).to_string()])?;
    }
    w.flush()?;
    let mut inputs: Vec<&Path> = vec![&a.pred];
    if let Some(s) = &a.stacking {
        inputs.push(s);
    }
    let out_refs: Vec<&Path> = outputs.iter().map(PathBuf::as_path).collect();
    record(
        &dir,
        "aggregate",
        json!({
            "scheme": a.scheme,
            "tau": a.tau,
            "ds_epsilon": a.eps,
            "ds_max_iterations": a.k_max,
            "ds_mode": if a.pooled { "pooled" } else { "per_patient" },
        }),
        &inputs,
        &out_refs,
    )
}

#[derive(Deserialize)]
struct ConsensusRow {
    segment_id: String,
    score: f64,
    #[allow(dead_code)]
    label: u8,
}

#[derive(Serialize)]
struct Block {
    mean: BTreeMap<&'static str, Option<f64>>,
    median: BTreeMap<&'static str, Option<f64>>,
}

impl Block {
    fn new(cols: &[(&'static str, &Option<Summary>)]) -> Self {
        Block {
            mean: cols.iter().map(|(n, s)| (*n, s.as_ref().map(|s| s.mean))).collect(),
            median: cols.iter().map(|(n, s)| (*n, s.as_ref().map(|s| s.median))).collect(),
        }
    }
}

#[derive(Serialize)]
struct MetricsReport {
    tau: f64,
    patients: usize,
    segment_based: Block,
    event_based: Block,
    per_patient: Vec<PatientMetrics>,
}

fn evaluate(a: EvaluateArgs, verbose: bool) -> Result<()> {
    let path = resolve(a.out, "metrics.json");
    let tracks = load_tracks(std::slice::from_ref(&a.annotations))?;
    let file = fs::File::open(&a.pred).with_context(|| format!("cannot read consensus {}", a.pred.display()))?;
    let mut scores: BTreeMap<String, Vec<(u32, f64)>> = BTreeMap::new();
    for row in csv::Reader::from_reader(file).deserialize() {
        let row: ConsensusRow = row.with_context(|| format!("malformed consensus {}", a.pred.display()))?;
        let (pid, start) = parse_id(&row.segment_id)?;
        scores.entry(pid.to_string()).or_default().push((start, row.score));
    }
    let mut order: Vec<&str> = Vec::new();
    for t in &tracks {
        if !order.contains(&t.patient_id.as_str()) {
            order.push(&t.patient_id);
        }
    }
    if let Some(pid) = scores.keys().find(|p| !order.contains(&p.as_str())) {
        bail!("no annotations for patient {pid} in {}", a.annotations.display());
    }
    let mut per_patient = Vec::new();
    for pid in order {
        let Some(rows) = scores.get(pid) else { continue };
        let own = tracks_of(&tracks, pid);
        let seconds = own.iter().map(AnnotationTrack::len).min().unwrap_or(0);
        let n = segment_count(seconds);
        let labels: Vec<SegmentLabel> = (0..n).map(|i| window_label(&own, i * SEGMENT_STEP_S as usize)).collect();
        let mut cell = vec![None; n];
        for &(start, s) in rows {
            let i = (start / SEGMENT_STEP_S) as usize;
            if start % SEGMENT_STEP_S != 0 || i >= n {
                bail!("segment {} of {pid} lies outside the annotated {seconds} s", start);
            }
            cell[i] = Some(s);
        }
        per_patient.push(evaluate_patient(pid, &labels, &cell, &own, a.tau)?);
    }
    let s = summarize_patients(&per_patient);
    if verbose {
        eprintln!("{} patients evaluated", per_patient.len());
    }
    let report = MetricsReport {
        tau: a.tau,
        patients: s.patients,
        segment_based: Block::new(&[("se", &s.se), ("sp", &s.sp), ("auc", &s.auc)]),
        event_based: Block::new(&[("sdr", &s.sdr), ("fd_per_hour", &s.fd_per_hour), ("mfdd", &s.mfdd)]),
        per_patient,
    };
    let dir = parent_dir(&path)?;
    write_json(&path, &report)?;
    record(&dir, "evaluate", json!({ "tau": a.tau }), &[&a.pred, &a.annotations], &[&path])
}

fn run_simulation(a: SimulateArgs, verbose: bool) -> Result<()> {
    let dir = resolve(a.out, "simulation");
    let mut cfg = match (&a.config, a.full_grid) {
        (Some(p), _) => SimulationConfig::load(p).with_context(|| format!("cannot load config {}", p.display()))?,
        (None, true) => SimulationConfig::full_grid(),
        (None, false) => SimulationConfig::default(),
    };
    if let Some(k) = a.k {
        cfg.experiment.k_values = k;
    }
    if let Some(v) = a.runs {
        cfg.experiment.runs = v;
    }
    if let Some(v) = a.seed {
        cfg.experiment.seed = v;
    }
    if let Some(v) = a.patients {
        cfg.cohort.n_patients = v;
    }
    if let Some(v) = a.tau {
        cfg.experiment.tau = v;
    }
    if let Some(v) = a.eps {
        cfg.experiment.ds_epsilon = v;
    }
    if let Some(v) = a.k_max {
        cfg.experiment.ds_max_iterations = v;
    }
    let out = simulate(&cfg, &dir)?;
    if verbose {
        for k in &cfg.experiment.k_values {
            let k = k.to_string();
            let line: Vec<String> = out
                .trend
                .rows
                .iter()
                .filter(|r| r.k == k && r.metric == "auc_mean")
                .map(|r| format!("{} {:.3}", r.scheme, r.median))
                .collect();
            eprintln!("k={k}: {}", line.join(", "));
        }
    }
    Ok(())
}

fn report(a: ReportArgs, verbose: bool) -> Result<()> {
    let dir = resolve(a.out, "report");
    let input = a.input.join("per_patient.csv");
    let rows = read_per_patient_csv(&input).with_context(|| format!("cannot read {}", input.display()))?;
    let present: BTreeSet<&str> = rows.iter().map(|r| r.scheme.as_str()).collect();
    let schemes: Vec<Scheme> = Scheme::ALL.into_iter().filter(|s| present.contains(s.as_str())).collect();
    let trend = trend_report(&rows, &[], &schemes);
    create_dir(&dir)?;
    let trend_path = dir.join("trend.csv");
    write_trend_csv(&trend_path, &trend)?;

    let mut ks: Vec<usize> = rows.iter().filter_map(|r| r.k.parse().ok()).collect();
    ks.sort_unstable();
    ks.dedup();
    let mut labels: Vec<String> = schemes.iter().map(Scheme::to_string).collect();
    labels.push(neofuse::simulation::LOCAL_AVERAGE.into());
    let mut md = String::new();
    for (metric, title) in [("auc_mean", "AUC"), ("sdr_mean", "SDR (%)"), ("fdh_mean", "FD/h")] {
        let _ = writeln!(md, "## {title}\n");
        let _ = writeln!(
            md,
            "| scheme | {} |",
            ks.iter().map(|k| format!("k={k}")).collect::<Vec<_>>().join(" | ")
        );
        let _ = writeln!(md, "|---|{}", "---|".repeat(ks.len()));
        for l in &labels {
            let cells: Vec<String> = ks
                .iter()
                .map(|k| {
                    trend
                        .get(l, &k.to_string(), metric)
                        .map_or_else(|| "-".into(), |r| format!("{:.3} [{:.3}, {:.3}]", r.median, r.q1, r.q3))
                })
                .collect();
            let _ = writeln!(md, "| {l} | {} |", cells.join(" | "));
        }
        if let Some(b) = trend.get(BASELINE, ALL_K, metric) {
            let _ = writeln!(md, "\nBaseline: {:.3} [{:.3}, {:.3}]", b.median, b.q1, b.q3);
        }
        md.push('\n');
    }
    let md_path = dir.join("summary.md");
    fs::write(&md_path, &md).with_context(|| format!("cannot write {}", md_path.display()))?;
    if verbose {
        eprint!("{md}");
    }
    record(&dir, "report", json!({ "rows": rows.len() }), &[&input], &[&trend_path, &md_path])
}

fn generate(a: GenerateArgs, verbose: bool) -> Result<()> {
    let dir = resolve(a.out, "cohort");
    let mut spec: CohortSpec = match &a.config {
        Some(p) => SimulationConfig::load(p).with_context(|| format!("cannot load config {}", p.display()))?.cohort,
        None => CohortSpec::default(),
    };
    if let Some(v) = a.patients {
        spec.n_patients = v;
    }
    if let Some(v) = a.duration {
        spec.duration_s = v;
    }
    if let Some(v) = a.seed {
        spec.seed = v;
    }
    spec.validate()?;
    create_dir(&dir)?;
    let written = (0..spec.n_patients)
        .into_par_iter()
        .map(|i| -> Result<(PathBuf, Vec<AnnotationTrack>)> {
            let p = generate_patient(&spec, i)?;
            let path = dir.join(format!("{}.json", p.plan.patient_id));
            write_recording(&path, &p.recording)?;
            Ok((path, p.plan.tracks))
        })
        .collect::<Result<Vec<_>>>()?;
    let ann_path = dir.join("annotations.csv");
    let tracks: Vec<AnnotationTrack> = written.iter().flat_map(|(_, t)| t.iter().cloned()).collect();
    write_annotations(&ann_path, &tracks)?;
    if verbose {
        eprintln!("{} recordings in {}", written.len(), dir.display());
    }
    let mut outputs: Vec<&Path> = written.iter().map(|(p, _)| p.as_path()).collect();
    outputs.push(&ann_path);
    record(&dir, "generate", json!({ "cohort": spec }), &[], &outputs)
}
