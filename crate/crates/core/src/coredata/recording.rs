use std::collections::HashSet;

use crate::error::{Error, Result};

/// Multi-channel EEG sampled at a fixed rate. Samples are microvolts,
/// stored channel-major with equal length per channel.
#[derive(Debug, Clone, PartialEq)]
pub struct Recording {
    patient_id: String,
    sample_rate_hz: f64,
    channels: Vec<String>,
    samples: Vec<Vec<f64>>,
}

impl Recording {
    pub fn new(
        patient_id: impl Into<String>,
        sample_rate_hz: f64,
        channels: Vec<String>,
        samples: Vec<Vec<f64>>,
    ) -> Result<Self> {
        if !(sample_rate_hz.is_finite() && sample_rate_hz > 0.0) {
            return Err(Error::InvalidSampleRate(sample_rate_hz));
        }
        if channels.is_empty() {
            return Err(Error::InvalidRecording("no channels".into()));
        }
        let mut seen = HashSet::new();
        for c in &channels {
            if !seen.insert(c.as_str()) {
                return Err(Error::InvalidRecording(format!("duplicate channel label {c}")));
            }
        }
        if samples.len() != channels.len() {
            return Err(Error::InvalidRecording(format!(
                "{} channel labels but {} sample rows",
                channels.len(),
                samples.len()
            )));
        }
        let n = samples[0].len();
        if let Some(bad) = samples.iter().position(|s| s.len() != n) {
            return Err(Error::InvalidRecording(format!(
                "channel {bad} has {} samples, expected {n}",
                samples[bad].len()
            )));
        }
        Ok(Recording {
            patient_id: patient_id.into(),
            sample_rate_hz,
            channels,
            samples,
        })
    }

    pub fn patient_id(&self) -> &str {
        &self.patient_id
    }

    pub fn sample_rate_hz(&self) -> f64 {
        self.sample_rate_hz
    }

    pub fn channels(&self) -> &[String] {
        &self.channels
    }

    pub fn samples(&self) -> &[Vec<f64>] {
        &self.samples
    }

    pub fn channel(&self, i: usize) -> &[f64] {
        &self.samples[i]
    }

    pub fn n_channels(&self) -> usize {
        self.channels.len()
    }

    pub fn n_samples(&self) -> usize {
        self.samples[0].len()
    }

    pub fn duration_s(&self) -> f64 {
        self.n_samples() as f64 / self.sample_rate_hz
    }

    /// Whole seconds covered by the recording.
    pub fn whole_seconds(&self) -> usize {
        (self.n_samples() as f64 / self.sample_rate_hz + 1e-9).floor() as usize
    }

    /// Same metadata, new sample rate and samples.
    pub fn with_samples(&self, sample_rate_hz: f64, samples: Vec<Vec<f64>>) -> Result<Self> {
        Recording::new(
            self.patient_id.clone(),
            sample_rate_hz,
            self.channels.clone(),
            samples,
        )
    }

    pub fn into_samples(self) -> Vec<Vec<f64>> {
        self.samples
    }
}

/// Per-second binary seizure labels of one expert for one recording.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AnnotationTrack {
    pub patient_id: String,
    pub expert_id: String,
    labels: Vec<u8>,
}

impl AnnotationTrack {
    pub fn new(
        patient_id: impl Into<String>,
        expert_id: impl Into<String>,
        labels: Vec<u8>,
    ) -> Result<Self> {
        if let Some(i) = labels.iter().position(|&l| l > 1) {
            return Err(Error::InvalidAnnotation(format!(
                "label {} at second {i} is not 0 or 1",
                labels[i]
            )));
        }
        Ok(AnnotationTrack {
            patient_id: patient_id.into(),
            expert_id: expert_id.into(),
            labels,
        })
    }

    pub fn from_bools(
        patient_id: impl Into<String>,
        expert_id: impl Into<String>,
        labels: &[bool],
    ) -> Self {
        AnnotationTrack {
            patient_id: patient_id.into(),
            expert_id: expert_id.into(),
            labels: labels.iter().map(|&b| u8::from(b)).collect(),
        }
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn is_seizure(&self, second: usize) -> bool {
        self.labels[second] == 1
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_zero_rate() {
        let err = Recording::new("p", 0.0, vec!["a".into()], vec![vec![0.0]]).unwrap_err();
        assert!(err.to_string().contains("invalid sample rate"));
    }

    #[test]
    fn rejects_ragged_channels() {
        let err = Recording::new(
            "p",
            32.0,
            vec!["a".into(), "b".into()],
            vec![vec![0.0; 4], vec![0.0; 3]],
        )
        .unwrap_err();
        assert!(matches!(err, Error::InvalidRecording(_)));
    }

    #[test]
    fn rejects_duplicate_labels() {
        let err = Recording::new(
            "p",
            32.0,
            vec!["a".into(), "a".into()],
            vec![vec![0.0; 4], vec![0.0; 4]],
        )
        .unwrap_err();
        assert!(err.to_string().contains("duplicate"));
    }

    #[test]
    fn rejects_non_binary_annotation() {
        assert!(AnnotationTrack::new("p", "e", vec![0, 1, 2]).is_err());
    }
}
