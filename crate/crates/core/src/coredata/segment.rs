use serde::{Deserialize, Serialize};

/// Window length in seconds.
pub const SEGMENT_DURATION_S: u32 = 16;
/// Offset between consecutive window starts (12 s overlap).
pub const SEGMENT_STEP_S: u32 = 4;
/// Sample rate of preprocessed segments.
pub const SEGMENT_RATE_HZ: u32 = 32;
/// Samples per channel in one window.
pub const SEGMENT_SAMPLES: usize = (SEGMENT_DURATION_S * SEGMENT_RATE_HZ) as usize;

/// Number of windows on the 4 s grid for a recording of `whole_seconds`.
pub fn segment_count(whole_seconds: usize) -> usize {
    let dur = SEGMENT_DURATION_S as usize;
    if whole_seconds < dur {
        0
    } else {
        (whole_seconds - dur) / SEGMENT_STEP_S as usize + 1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum SegmentLabel {
    /// Every expert marks every second as seizure.
    Seizure,
    /// Every expert marks every second as non-seizure.
    Nonseizure,
    /// Experts agree on every second but the window straddles a boundary.
    Mixed,
    /// Experts differ somewhere in the window.
    Disagreement,
    /// Zero-voltage rule fired.
    Excluded,
    /// Cut without annotations.
    Unlabeled,
}

impl SegmentLabel {
    /// Unanimous whole-window label usable for training and segment metrics.
    pub fn is_evaluable(self) -> bool {
        matches!(self, SegmentLabel::Seizure | SegmentLabel::Nonseizure)
    }

    pub fn as_binary(self) -> Option<bool> {
        match self {
            SegmentLabel::Seizure => Some(true),
            SegmentLabel::Nonseizure => Some(false),
            _ => None,
        }
    }
}

/// A 16 s window of preprocessed EEG.
#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    pub patient_id: String,
    pub start_s: u32,
    /// channels × 512 samples at 32 Hz.
    pub data: Vec<Vec<f64>>,
    pub label: SegmentLabel,
}

impl Segment {
    pub fn id(&self) -> String {
        segment_id(&self.patient_id, self.start_s)
    }

    pub fn index(&self) -> usize {
        (self.start_s / SEGMENT_STEP_S) as usize
    }

    pub fn n_channels(&self) -> usize {
        self.data.len()
    }
}

pub type SegmentSet = Vec<Segment>;

/// Canonical identifier `patient:start_s`.
pub fn segment_id(patient_id: &str, start_s: u32) -> String {
    format!("{patient_id}:{start_s}")
}

/// Inverse of [`segment_id`]. The patient part may itself contain colons.
pub fn parse_segment_id(id: &str) -> Option<(&str, u32)> {
    let (patient, start) = id.rsplit_once(':')?;
    Some((patient, start.parse().ok()?))
}
