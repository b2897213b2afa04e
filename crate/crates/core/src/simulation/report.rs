use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::experiment::{average_metrics, FoldOutcome};
use crate::aggregation::Scheme;
use crate::error::{Error, Result};
use crate::metrics::{median, quantile, PatientMetrics, METRIC_NAMES};

/// Row label for the mean over local detectors.
pub const LOCAL_AVERAGE: &str = "local_avg";
pub const BASELINE: &str = "baseline";
/// `k` column of rows that do not depend on the partition.
pub const ALL_K: &str = "all";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerPatientRow {
    pub run: usize,
    pub k: String,
    pub patient_id: String,
    pub scheme: String,
    pub metrics: PatientMetrics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrendRow {
    pub scheme: String,
    pub k: String,
    /// `<metric>_mean` or `<metric>_median` over the patients of one run.
    pub metric: String,
    pub median: f64,
    pub q1: f64,
    pub q3: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstitutionRow {
    pub k: usize,
    /// Median subset size per fold, averaged over folds and runs.
    pub mean_median_patients: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TrendReport {
    pub rows: Vec<TrendRow>,
    pub institutions: Vec<InstitutionRow>,
}

impl TrendReport {
    pub fn get(&self, scheme: &str, k: &str, metric: &str) -> Option<&TrendRow> {
        self.rows.iter().find(|r| r.scheme == scheme && r.k == k && r.metric == metric)
    }
}

/// Flattens fold outcomes: every scheme and the local average per k, then the baseline.
pub fn per_patient_rows(folds: &[FoldOutcome]) -> Vec<PerPatientRow> {
    let mut rows = Vec::new();
    for f in folds {
        for ko in &f.per_k {
            let k = ko.k.to_string();
            for (scheme, m) in &ko.schemes {
                rows.push(PerPatientRow {
                    run: f.run,
                    k: k.clone(),
                    patient_id: f.patient_id.clone(),
                    scheme: scheme.to_string(),
                    metrics: m.clone(),
                });
            }
            rows.push(PerPatientRow {
                run: f.run,
                k,
                patient_id: f.patient_id.clone(),
                scheme: LOCAL_AVERAGE.into(),
                metrics: average_metrics(&f.patient_id, &ko.local),
            });
        }
        rows.push(PerPatientRow {
            run: f.run,
            k: ALL_K.into(),
            patient_id: f.patient_id.clone(),
            scheme: BASELINE.into(),
            metrics: f.baseline.clone(),
        });
    }
    rows
}

fn k_order(k: &str) -> (u8, usize) {
    match k.parse::<usize>() {
        Ok(v) => (0, v),
        Err(_) => (1, 0),
    }
}

/// Median and quartiles over runs of each run's patient mean and median,
/// keyed by (scheme, k, metric).
pub fn trend_report(rows: &[PerPatientRow], folds: &[FoldOutcome], schemes: &[Scheme]) -> TrendReport {
    let mut labels: Vec<String> = schemes.iter().map(Scheme::to_string).collect();
    labels.push(LOCAL_AVERAGE.into());
    labels.push(BASELINE.into());

    // (label, k) -> run -> patients
    let mut groups: BTreeMap<(usize, (u8, usize), String), BTreeMap<usize, Vec<&PatientMetrics>>> = BTreeMap::new();
    for r in rows {
        let Some(li) = labels.iter().position(|l| *l == r.scheme) else {
            continue;
        };
        groups
            .entry((li, k_order(&r.k), r.k.clone()))
            .or_default()
            .entry(r.run)
            .or_default()
            .push(&r.metrics);
    }

    let mut out = Vec::new();
    for ((li, _, k), runs) in &groups {
        for (mi, name) in METRIC_NAMES.iter().enumerate() {
            let mut run_means = Vec::new();
            let mut run_medians = Vec::new();
            for patients in runs.values() {
                let v: Vec<f64> = patients.iter().filter_map(|m| m.values()[mi]).collect();
                if let Some(med) = median(&v) {
                    run_means.push(v.iter().sum::<f64>() / v.len() as f64);
                    run_medians.push(med);
                }
            }
            for (suffix, values) in [("mean", &run_means), ("median", &run_medians)] {
                if let (Some(m), Some(a), Some(b)) =
                    (median(values), quantile(values, 0.25), quantile(values, 0.75))
                {
                    out.push(TrendRow {
                        scheme: labels[*li].clone(),
                        k: k.clone(),
                        metric: format!("{name}_{suffix}"),
                        median: m,
                        q1: a,
                        q3: b,
                    });
                }
            }
        }
    }

    let mut by_k: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    for f in folds {
        for ko in &f.per_k {
            let sizes: Vec<f64> = ko.subset_sizes.iter().map(|&s| s as f64).collect();
            if let Some(m) = median(&sizes) {
                by_k.entry(ko.k).or_default().push(m);
            }
        }
    }
    let institutions = by_k
        .into_iter()
        .map(|(k, v)| InstitutionRow {
            k,
            mean_median_patients: v.iter().sum::<f64>() / v.len() as f64,
        })
        .collect();
    TrendReport { rows: out, institutions }
}

fn fmt(v: f64) -> String {
    format!("{v:.6}")
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt).unwrap_or_default()
}

fn writer(path: &Path) -> Result<csv::Writer<std::fs::File>> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::Writer::from_writer(file))
}

pub fn write_trend_csv(path: impl AsRef<Path>, report: &TrendReport) -> Result<()> {
    let mut w = writer(path.as_ref())?;
    w.write_record(["scheme", "k", "metric", "median", "q1", "q3"])?;
    for r in &report.rows {
        w.write_record([r.scheme.clone(), r.k.clone(), r.metric.clone(), fmt(r.median), fmt(r.q1), fmt(r.q3)])?;
    }
    w.flush().map_err(|e| Error::io(path.as_ref(), e))
}

pub fn write_institutions_csv(path: impl AsRef<Path>, report: &TrendReport) -> Result<()> {
    let mut w = writer(path.as_ref())?;
    w.write_record(["k", "mean_median_patients"])?;
    for r in &report.institutions {
        w.write_record([r.k.to_string(), fmt(r.mean_median_patients)])?;
    }
    w.flush().map_err(|e| Error::io(path.as_ref(), e))
}

pub const PER_PATIENT_HEADER: [&str; 10] = ["run", "k", "patient_id", "scheme", "se", "sp", "auc", "sdr", "fdh", "mfdd"];

pub fn write_per_patient_csv(path: impl AsRef<Path>, rows: &[PerPatientRow]) -> Result<()> {
    let mut w = writer(path.as_ref())?;
    w.write_record(PER_PATIENT_HEADER)?;
    for r in rows {
        let m = &r.metrics;
        w.write_record([
            r.run.to_string(),
            r.k.clone(),
            r.patient_id.clone(),
            r.scheme.clone(),
            fmt_opt(m.se),
            fmt_opt(m.sp),
            fmt_opt(m.auc),
            fmt_opt(m.sdr),
            fmt(m.fd_per_hour),
            fmt(m.mfdd),
        ])?;
    }
    w.flush().map_err(|e| Error::io(path.as_ref(), e))
}

/// Reads a per-patient table back; empty cells become `None`.
pub fn read_per_patient_csv(path: impl AsRef<Path>) -> Result<Vec<PerPatientRow>> {
    let path = path.as_ref();
    let mut r = csv::Reader::from_path(path)?;
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    if header != PER_PATIENT_HEADER {
        return Err(Error::Csv(format!("{}: unexpected header {header:?}", path.display())));
    }
    let num = |s: &str| -> Result<Option<f64>> {
        if s.is_empty() {
            Ok(None)
        } else {
            s.parse::<f64>()
                .map(Some)
                .map_err(|e| Error::Csv(format!("{}: bad number {s:?}: {e}", path.display())))
        }
    };
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let run = rec[0]
            .parse()
            .map_err(|e| Error::Csv(format!("{}: bad run {:?}: {e}", path.display(), &rec[0])))?;
        rows.push(PerPatientRow {
            run,
            k: rec[1].to_string(),
            patient_id: rec[2].to_string(),
            scheme: rec[3].to_string(),
            metrics: PatientMetrics {
                patient_id: rec[2].to_string(),
                se: num(&rec[4])?,
                sp: num(&rec[5])?,
                auc: num(&rec[6])?,
                sdr: num(&rec[7])?,
                fd_per_hour: num(&rec[8])?.unwrap_or(0.0),
                mfdd: num(&rec[9])?.unwrap_or(0.0),
            },
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn metrics(auc: f64) -> PatientMetrics {
        PatientMetrics {
            patient_id: "p".into(),
            se: Some(80.0),
            sp: Some(90.0),
            auc: Some(auc),
            sdr: None,
            fd_per_hour: 1.5,
            mfdd: 12.0,
        }
    }

    fn row(run: usize, k: &str, scheme: &str, auc: f64) -> PerPatientRow {
        PerPatientRow {
            run,
            k: k.into(),
            patient_id: "p".into(),
            scheme: scheme.into(),
            metrics: metrics(auc),
        }
    }

    /// Spearman rank correlation without ties.
    fn spearman(x: &[f64], y: &[f64]) -> f64 {
        let rank = |v: &[f64]| {
            let mut idx: Vec<usize> = (0..v.len()).collect();
            idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
            let mut r = vec![0.0; v.len()];
            for (pos, &i) in idx.iter().enumerate() {
                r[i] = pos as f64;
            }
            r
        };
        let (rx, ry) = (rank(x), rank(y));
        let n = x.len() as f64;
        let d2: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - b).powi(2)).sum();
        1.0 - 6.0 * d2 / (n * (n * n - 1.0))
    }

    #[test]
    fn single_run_has_zero_spread() {
        let rows = vec![row(0, "3", "mean", 0.8), row(0, "3", "mean", 0.6)];
        let t = trend_report(&rows, &[], &[Scheme::Mean]);
        let r = t.get("mean", "3", "auc_mean").unwrap();
        assert!((r.median - 0.7).abs() < 1e-15);
        assert_eq!((r.q1, r.q3), (r.median, r.median));
        assert!(t.get("mean", "3", "sdr_mean").is_none());
    }

    #[test]
    fn constant_metric_has_zero_iqr() {
        let rows: Vec<_> = (0..5).map(|run| row(run, "4", "ds", 0.9)).collect();
        let r = trend_report(&rows, &[], &[Scheme::Ds]).get("ds", "4", "auc_median").cloned().unwrap();
        assert_eq!((r.median, r.q1, r.q3), (0.9, 0.9, 0.9));
    }

    #[test]
    fn decreasing_local_auc_has_negative_rank_correlation() {
        let mut rows = Vec::new();
        for (k, auc) in [(3, 0.85), (4, 0.82), (5, 0.80), (6, 0.77)] {
            for run in 0..3 {
                rows.push(row(run, &k.to_string(), LOCAL_AVERAGE, auc + 0.001 * run as f64));
            }
        }
        let t = trend_report(&rows, &[], &[]);
        let ks = [3.0, 4.0, 5.0, 6.0];
        let medians: Vec<f64> = ks
            .iter()
            .map(|k| t.get(LOCAL_AVERAGE, &k.to_string(), "auc_mean").unwrap().median)
            .collect();
        assert!(spearman(&ks, &medians) < 0.0);
    }

    #[test]
    fn rows_are_ordered_by_scheme_then_k() {
        let rows = vec![
            row(0, ALL_K, BASELINE, 0.7),
            row(0, "10", "mv", 0.7),
            row(0, "3", "mv", 0.7),
            row(0, "3", "mean", 0.7),
        ];
        let t = trend_report(&rows, &[], &[Scheme::Mv, Scheme::Mean]);
        let keys: Vec<(String, String)> = t.rows.iter().map(|r| (r.scheme.clone(), r.k.clone())).collect();
        let first = |s: &str, k: &str| keys.iter().position(|x| x.0 == s && x.1 == k).unwrap();
        assert!(first("mv", "3") < first("mv", "10"));
        assert!(first("mv", "10") < first("mean", "3"));
        assert!(first("mean", "3") < first(BASELINE, ALL_K));
    }

    #[test]
    fn per_patient_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("pp.csv");
        let rows = vec![row(0, "3", "mv", 0.75), row(1, ALL_K, BASELINE, 0.5)];
        write_per_patient_csv(&path, &rows).unwrap();
        assert_eq!(read_per_patient_csv(&path).unwrap(), rows);
    }
}
