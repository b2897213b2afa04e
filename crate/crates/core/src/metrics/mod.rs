//! Segment- and event-based evaluation and inter-rater agreement.

pub mod agreement;
pub mod auc;
pub mod events;
pub mod segment;
pub mod summary;

use serde::{Deserialize, Serialize};

use crate::coredata::{AnnotationTrack, SegmentLabel};
use crate::error::{Error, Result};

pub use agreement::gwet_ac1;
pub use auc::auc;
pub use events::{
    any_expert_timeline, consensus_timeline, event_metrics, extract_events, overlap_average, EventMetrics,
    MIN_SEIZURE_DURATION_S,
};
pub use segment::{confusion, segment_metrics, ConfusionCounts, SegmentMetrics};
pub use summary::{median, quantile, summarize, Summary};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatientMetrics {
    pub patient_id: String,
    pub se: Option<f64>,
    pub sp: Option<f64>,
    pub auc: Option<f64>,
    pub sdr: Option<f64>,
    pub fd_per_hour: f64,
    pub mfdd: f64,
}

/// Names and accessors in report order.
pub const METRIC_NAMES: [&str; 6] = ["se", "sp", "auc", "sdr", "fdh", "mfdd"];

impl PatientMetrics {
    pub fn values(&self) -> [Option<f64>; 6] {
        [
            self.se,
            self.sp,
            self.auc,
            self.sdr,
            Some(self.fd_per_hour),
            Some(self.mfdd),
        ]
    }
}

/// Evaluation of one recording's segment scores against its expert tracks.
///
/// `labels[i]` and `scores[i]` describe the segment starting at `4·i` s;
/// `None` scores mark segments that were not scored (excluded).
pub fn evaluate_patient(
    patient_id: &str,
    labels: &[SegmentLabel],
    scores: &[Option<f64>],
    tracks: &[AnnotationTrack],
    tau: f64,
) -> Result<PatientMetrics> {
    if labels.len() != scores.len() {
        return Err(Error::Shape(format!("{} labels for {} scores", labels.len(), scores.len())));
    }
    let whole_seconds = tracks
        .iter()
        .map(AnnotationTrack::len)
        .min()
        .ok_or_else(|| Error::InvalidAnnotation(format!("no annotations for {patient_id}")))?;
    let mut eval_scores = Vec::new();
    let mut truth = Vec::new();
    for (label, score) in labels.iter().zip(scores) {
        if let (Some(t), Some(s)) = (label.as_binary(), score) {
            eval_scores.push(*s);
            truth.push(t);
        }
    }
    let predicted: Vec<bool> = eval_scores.iter().map(|&s| s >= tau).collect();
    let seg = segment_metrics(&predicted, &truth)?;
    let auc = match auc::auc(&eval_scores, &truth) {
        Ok(a) => Some(a),
        Err(Error::SingleClass(_)) => None,
        Err(e) => return Err(e),
    };
    let cells = overlap_average(scores);
    let predicted_events = extract_events(patient_id, &cells, tau, MIN_SEIZURE_DURATION_S);
    let ev = event_metrics(
        &predicted_events,
        &consensus_timeline(tracks),
        &any_expert_timeline(tracks),
        whole_seconds as f64 / 3600.0,
    )?;
    Ok(PatientMetrics {
        patient_id: patient_id.to_string(),
        se: seg.se,
        sp: seg.sp,
        auc,
        sdr: ev.sdr,
        fd_per_hour: ev.fd_per_hour,
        mfdd: ev.mfdd,
    })
}

/// Mean and median per metric over patients with the metric defined.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsSummary {
    pub patients: usize,
    pub se: Option<Summary>,
    pub sp: Option<Summary>,
    pub auc: Option<Summary>,
    pub sdr: Option<Summary>,
    pub fd_per_hour: Option<Summary>,
    pub mfdd: Option<Summary>,
}

pub fn summarize_patients(patients: &[PatientMetrics]) -> MetricsSummary {
    let col = |i: usize| summarize(patients.iter().map(|p| p.values()[i]));
    MetricsSummary {
        patients: patients.len(),
        se: col(0),
        sp: col(1),
        auc: col(2),
        sdr: col(3),
        fd_per_hour: col(4),
        mfdd: col(5),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_scores_on_a_short_record() {
        // 120 s, seizure at [40, 80) for both experts
        let mut l = vec![0u8; 120];
        l[40..80].iter_mut().for_each(|v| *v = 1);
        let tracks = vec![
            AnnotationTrack::new("p", "A", l.clone()).unwrap(),
            AnnotationTrack::new("p", "B", l.clone()).unwrap(),
        ];
        let n = crate::coredata::segment_count(120);
        let labels: Vec<SegmentLabel> = (0..n)
            .map(|i| crate::signal::window_label(&tracks, 4 * i))
            .collect();
        let scores: Vec<Option<f64>> = (0..n)
            .map(|i| {
                let mid = 4 * i + 8;
                Some(if (40..80).contains(&mid) { 0.9 } else { 0.1 })
            })
            .collect();
        let m = evaluate_patient("p", &labels, &scores, &tracks, 0.5).unwrap();
        assert_eq!(m.se, Some(100.0));
        assert_eq!(m.sp, Some(100.0));
        assert_eq!(m.auc, Some(1.0));
        assert_eq!(m.sdr, Some(100.0));
        assert_eq!(m.fd_per_hour, 0.0);
    }

    #[test]
    fn summary_skips_undefined() {
        let p = |sdr: Option<f64>| PatientMetrics {
            patient_id: "p".into(),
            se: Some(80.0),
            sp: Some(90.0),
            auc: Some(0.9),
            sdr,
            fd_per_hour: 1.0,
            mfdd: 10.0,
        };
        let s = summarize_patients(&[p(Some(100.0)), p(None), p(Some(50.0))]);
        assert_eq!(s.sdr.unwrap().count, 2);
        assert_eq!(s.sdr.unwrap().mean, 75.0);
        assert_eq!(s.se.unwrap().count, 3);
    }
}
