//! Event-based evaluation: overlap post-processing, event extraction and
//! SDR / FD/h / MFDD.

use serde::{Deserialize, Serialize};

use crate::coredata::{AnnotationTrack, EventTimeline, SEGMENT_DURATION_S, SEGMENT_STEP_S};
use crate::error::{Error, Result};

/// Cells covered by one segment.
const CELLS_PER_SEGMENT: usize = (SEGMENT_DURATION_S / SEGMENT_STEP_S) as usize;

pub const MIN_SEIZURE_DURATION_S: u32 = 10;

/// Averages overlapping segment scores onto the 4 s grid. Segment `i` covers
/// cells `i..i+4`; missing segments (`None`) contribute nothing and cells no
/// segment covers stay `None`.
pub fn overlap_average(segment_scores: &[Option<f64>]) -> Vec<Option<f64>> {
    if segment_scores.is_empty() {
        return Vec::new();
    }
    let n_cells = segment_scores.len() + CELLS_PER_SEGMENT - 1;
    let mut sum = vec![0.0; n_cells];
    let mut count = vec![0usize; n_cells];
    for (i, s) in segment_scores.iter().enumerate() {
        if let Some(v) = s {
            for c in i..i + CELLS_PER_SEGMENT {
                sum[c] += v;
                count[c] += 1;
            }
        }
    }
    sum.into_iter()
        .zip(count)
        .map(|(s, n)| (n > 0).then(|| s / n as f64))
        .collect()
}

/// Thresholds cells inclusively, merges runs and drops events shorter than
/// `min_duration_s`.
pub fn extract_events(source: &str, cells: &[Option<f64>], tau: f64, min_duration_s: u32) -> EventTimeline {
    let mask: Vec<bool> = cells.iter().map(|c| c.is_some_and(|v| v >= tau)).collect();
    let mut t = EventTimeline::from_mask(source, &mask, SEGMENT_STEP_S);
    t.retain(|e| e.duration_s() >= min_duration_s);
    t
}

/// Seconds every expert marks as seizure.
pub fn consensus_timeline(tracks: &[AnnotationTrack]) -> EventTimeline {
    let n = tracks.iter().map(AnnotationTrack::len).min().unwrap_or(0);
    let mask: Vec<bool> = (0..n)
        .map(|s| !tracks.is_empty() && tracks.iter().all(|t| t.is_seizure(s)))
        .collect();
    EventTimeline::from_mask("consensus", &mask, 1)
}

/// Seconds any expert marks as seizure.
pub fn any_expert_timeline(tracks: &[AnnotationTrack]) -> EventTimeline {
    let n = tracks.iter().map(AnnotationTrack::len).max().unwrap_or(0);
    let mask: Vec<bool> = (0..n)
        .map(|s| tracks.iter().any(|t| s < t.len() && t.is_seizure(s)))
        .collect();
    EventTimeline::from_mask("any_expert", &mask, 1)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EventMetrics {
    /// Detected consensus seizures / consensus seizures · 100; absent without consensus seizures.
    pub sdr: Option<f64>,
    pub fd_per_hour: f64,
    /// Mean false-detection duration in seconds, 0 without false detections.
    pub mfdd: f64,
    pub detected: usize,
    pub consensus_seizures: usize,
    pub false_detections: usize,
}

pub fn event_metrics(
    predicted: &EventTimeline,
    consensus: &EventTimeline,
    any_expert: &EventTimeline,
    duration_h: f64,
) -> Result<EventMetrics> {
    if !(duration_h > 0.0 && duration_h.is_finite()) {
        return Err(Error::Shape(format!("duration {duration_h} h must be positive")));
    }
    let detected = consensus
        .events()
        .iter()
        .filter(|c| predicted.overlaps_any(c))
        .count();
    let false_events: Vec<u32> = predicted
        .events()
        .iter()
        .filter(|p| !any_expert.overlaps_any(p))
        .map(|p| p.duration_s())
        .collect();
    let ids = false_events.len();
    let sdr = (!consensus.is_empty()).then(|| detected as f64 / consensus.len() as f64 * 100.0);
    let mfdd = if ids == 0 {
        0.0
    } else {
        false_events.iter().map(|&d| f64::from(d)).sum::<f64>() / ids as f64
    };
    Ok(EventMetrics {
        sdr,
        fd_per_hour: ids as f64 / duration_h,
        mfdd,
        detected,
        consensus_seizures: consensus.len(),
        false_detections: ids,
    })
}
