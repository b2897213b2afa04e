use rand::Rng;

use crate::coredata::{
    segment_count, AnnotationTrack, Recording, Segment, SegmentLabel, SegmentSet, SEGMENT_DURATION_S,
    SEGMENT_RATE_HZ, SEGMENT_SAMPLES, SEGMENT_STEP_S,
};
use crate::error::{Error, Result};

/// Samples in one second at the segment rate; a zero run must exceed this.
const ZERO_RUN_LIMIT: usize = SEGMENT_RATE_HZ as usize;

/// Consensus label of the window `[start_s, start_s + 16)` from expert tracks alone.
pub fn window_label(tracks: &[AnnotationTrack], start_s: usize) -> SegmentLabel {
    let end = start_s + SEGMENT_DURATION_S as usize;
    let Some(first) = tracks.first() else {
        return SegmentLabel::Disagreement;
    };
    for s in start_s..end {
        let v = first.labels()[s];
        if tracks[1..].iter().any(|t| t.labels()[s] != v) {
            return SegmentLabel::Disagreement;
        }
    }
    let window = &first.labels()[start_s..end];
    if window.iter().all(|&l| l == 1) {
        SegmentLabel::Seizure
    } else if window.iter().all(|&l| l == 0) {
        SegmentLabel::Nonseizure
    } else {
        SegmentLabel::Mixed
    }
}

/// True when some channel holds more than one second of exact zeros.
pub fn zero_voltage_excluded(segment: &Segment) -> bool {
    segment.data.iter().any(|ch| has_zero_run(ch, ZERO_RUN_LIMIT))
}

fn has_zero_run(samples: &[f64], limit: usize) -> bool {
    let mut run = 0;
    for &v in samples {
        if v == 0.0 {
            run += 1;
            if run > limit {
                return true;
            }
        } else {
            run = 0;
        }
    }
    false
}

/// Checks that tracks belong to the recording's patient and cover it.
pub fn validate_tracks(whole_seconds: usize, patient_id: &str, tracks: &[AnnotationTrack]) -> Result<()> {
    if tracks.is_empty() {
        return Err(Error::InvalidAnnotation(format!("no annotations for {patient_id}")));
    }
    for t in tracks {
        if t.patient_id != patient_id {
            return Err(Error::InvalidAnnotation(format!(
                "track of {} given for recording of {patient_id}",
                t.patient_id
            )));
        }
        if t.len() < whole_seconds {
            return Err(Error::InvalidAnnotation(format!(
                "annotation of expert {} covers {} s, shorter than the {whole_seconds} s recording",
                t.expert_id,
                t.len()
            )));
        }
    }
    Ok(())
}

fn cut(rec: &Recording, label: impl Fn(usize) -> SegmentLabel) -> Result<SegmentSet> {
    if (rec.sample_rate_hz() - SEGMENT_RATE_HZ as f64).abs() > 1e-9 {
        return Err(Error::InvalidSampleRate(rec.sample_rate_hz()));
    }
    let rate = SEGMENT_RATE_HZ as usize;
    let segments = (0..segment_count(rec.whole_seconds()))
        .map(|idx| {
            let start_s = idx * SEGMENT_STEP_S as usize;
            let from = start_s * rate;
            let data: Vec<Vec<f64>> = rec
                .samples()
                .iter()
                .map(|ch| ch[from..from + SEGMENT_SAMPLES].to_vec())
                .collect();
            let mut seg = Segment {
                patient_id: rec.patient_id().to_string(),
                start_s: start_s as u32,
                data,
                label: SegmentLabel::Excluded,
            };
            if !zero_voltage_excluded(&seg) {
                seg.label = label(start_s);
            }
            seg
        })
        .collect();
    Ok(segments)
}

/// Cuts a 32 Hz recording into 16 s windows on the 4 s grid and labels each.
pub fn segment_recording(rec: &Recording, annotations: &[AnnotationTrack]) -> Result<SegmentSet> {
    validate_tracks(rec.whole_seconds(), rec.patient_id(), annotations)?;
    cut(rec, |start_s| window_label(annotations, start_s))
}

/// Same grid without annotations; kept segments are `Unlabeled`.
pub fn cut_segments(rec: &Recording) -> Result<SegmentSet> {
    cut(rec, |_| SegmentLabel::Unlabeled)
}

/// Indices of a class-balanced subset: every seizure item plus a uniform
/// sample of non-seizure items of the same size, in original order.
pub fn balance_indices<R: Rng + ?Sized>(labels: &[bool], rng: &mut R) -> Result<Vec<usize>> {
    let seizure: Vec<usize> = (0..labels.len()).filter(|&i| labels[i]).collect();
    let normal: Vec<usize> = (0..labels.len()).filter(|&i| !labels[i]).collect();
    if seizure.is_empty() {
        return Err(Error::SingleClass("no seizure segments in training set".into()));
    }
    if normal.len() <= seizure.len() {
        return Ok((0..labels.len()).collect());
    }
    let mut keep = seizure;
    keep.extend(
        rand::seq::index::sample(rng, normal.len(), keep.len())
            .into_iter()
            .map(|i| normal[i]),
    );
    keep.sort_unstable();
    Ok(keep)
}

pub fn balance_training_set<R: Rng + ?Sized>(segments: &[Segment], rng: &mut R) -> Result<SegmentSet> {
    let labels = segments
        .iter()
        .map(|s| {
            s.label.as_binary().ok_or_else(|| {
                Error::InvalidAnnotation(format!("segment {} has training-ineligible label {:?}", s.id(), s.label))
            })
        })
        .collect::<Result<Vec<bool>>>()?;
    let keep = balance_indices(&labels, rng)?;
    Ok(keep.into_iter().map(|i| segments[i].clone()).collect())
}
