//! End-to-end experiment: synthetic cohort, institutions, local training,
//! fusion, leave-one-subject-out evaluation and trend tables.

pub mod cohort;
pub mod experiment;
pub mod partition;
pub mod report;

use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::{design_from, FilterDesign, IirFilter};

pub use cohort::{generate_cohort, generate_patient, plan_patient, synthesize, CohortSpec, PatientPlan, SignalSpec, SyntheticPatient};
pub use experiment::{
    average_metrics, fold_subsets, run_loso, training_set, DsSummary, ExperimentConfig, FoldOutcome, KOutcome,
    PatientData,
};
pub use partition::{partition_patients, MIN_PATIENTS_PER_SUBSET};
pub use report::{
    per_patient_rows, read_per_patient_csv, trend_report, write_institutions_csv, write_per_patient_csv,
    write_trend_csv, PerPatientRow, TrendReport, TrendRow, ALL_K, BASELINE, LOCAL_AVERAGE,
};

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulationConfig {
    pub cohort: CohortSpec,
    pub experiment: ExperimentConfig,
}

impl SimulationConfig {
    /// 38 patients, k = 3..10, ten runs.
    pub fn full_grid() -> Self {
        SimulationConfig {
            cohort: CohortSpec::full_scale(),
            experiment: ExperimentConfig::full_grid(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.cohort.validate()?;
        self.experiment.validate(self.cohort.n_patients)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }
}

pub fn eeg_filter(sample_rate_hz: f64) -> Result<IirFilter> {
    design_from(FilterDesign::eeg_default(sample_rate_hz))
}

/// Generates, preprocesses and featurizes every patient, one recording in memory per worker.
pub fn prepare_cohort(spec: &CohortSpec) -> Result<Vec<PatientData>> {
    spec.validate()?;
    let filter = eeg_filter(spec.sample_rate_hz)?;
    (0..spec.n_patients)
        .into_par_iter()
        .map(|i| {
            let p = generate_patient(spec, i)?;
            PatientData::from_recording(&p.recording, p.plan.tracks, &filter)
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct SimulationOutput {
    pub folds: Vec<FoldOutcome>,
    pub per_patient: Vec<PerPatientRow>,
    pub trend: TrendReport,
}

#[derive(Serialize)]
struct DsParamsFile<'a> {
    run: usize,
    k: usize,
    patient_id: &'a str,
    t: f64,
    alpha: &'a [f64],
    beta: &'a [f64],
    iterations: usize,
    converged: bool,
    log_likelihood: f64,
}

#[derive(Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    version: &'static str,
    command: &'static str,
    rng: &'static str,
    cohort_seed: u64,
    experiment_seed: u64,
    config: &'a SimulationConfig,
    outputs: Vec<String>,
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Runs the experiment and writes `trend.csv`, `per_patient.csv`,
/// `institutions.csv`, `ds_params/*.json` and `manifest.json` into `out_dir`.
pub fn simulate(config: &SimulationConfig, out_dir: impl AsRef<Path>) -> Result<SimulationOutput> {
    config.validate()?;
    let out = out_dir.as_ref();
    let data = prepare_cohort(&config.cohort)?;
    let folds = run_loso(&data, &config.experiment)?;
    let per_patient = per_patient_rows(&folds);
    let trend = trend_report(&per_patient, &folds, &config.experiment.schemes);

    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    write_trend_csv(out.join("trend.csv"), &trend)?;
    write_per_patient_csv(out.join("per_patient.csv"), &per_patient)?;
    write_institutions_csv(out.join("institutions.csv"), &trend)?;
    let ds_dir = out.join("ds_params");
    fs::create_dir_all(&ds_dir).map_err(|e| Error::io(&ds_dir, e))?;
    let mut outputs = vec![
        "trend.csv".to_string(),
        "per_patient.csv".to_string(),
        "institutions.csv".to_string(),
    ];
    for f in &folds {
        for ko in &f.per_k {
            if let Some(ds) = &ko.ds {
                let name = format!("run{}_k{}_{}.json", f.run, ko.k, f.patient_id);
                write_json(
                    &ds_dir.join(&name),
                    &DsParamsFile {
                        run: f.run,
                        k: ko.k,
                        patient_id: &f.patient_id,
                        t: ds.theta.t,
                        alpha: &ds.theta.alpha,
                        beta: &ds.theta.beta,
                        iterations: ds.iterations,
                        converged: ds.converged,
                        log_likelihood: ds.log_likelihood,
                    },
                )?;
                outputs.push(format!("ds_params/{name}"));
            }
        }
    }
    write_json(
        &out.join("manifest.json"),
        &Manifest {
            tool: "neofuse",
            version: env!("CARGO_PKG_VERSION"),
            command: "simulate",
            rng: crate::rng::RNG_ALGORITHM,
            cohort_seed: config.cohort.seed,
            experiment_seed: config.experiment.seed,
            config,
            outputs,
        },
    )?;
    Ok(SimulationOutput {
        folds,
        per_patient,
        trend,
    })
}
