//! On-disk formats.
//!
//! * Recording: `<name>.json` header plus `<name>.f32` payload of
//!   little-endian IEEE-754 float32 samples, channel-major.
//! * Annotations: CSV `patient_id,expert_id,second_index,label`.
//! * Predictions: CSV `segment_id,detector_id,probability`.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::prediction::PredictionMatrix;
use super::recording::{AnnotationTrack, Recording};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RecordingHeader {
    pub patient_id: String,
    pub sample_rate_hz: f64,
    pub channels: Vec<String>,
    pub n_samples: usize,
}

/// Resolves `<name>`, `<name>.json` or `<name>.f32` to the header and payload paths.
pub fn recording_paths(path: &Path) -> (PathBuf, PathBuf) {
    let stem = match path.extension().and_then(|e| e.to_str()) {
        Some("json") | Some("f32") => path.with_extension(""),
        _ => path.to_path_buf(),
    };
    let mut header = stem.clone().into_os_string();
    header.push(".json");
    let mut payload = stem.into_os_string();
    payload.push(".f32");
    (header.into(), payload.into())
}

pub fn load_recording(path: impl AsRef<Path>) -> Result<Recording> {
    let (header_path, payload_path) = recording_paths(path.as_ref());
    let text = fs::read_to_string(&header_path).map_err(|e| Error::io(&header_path, e))?;
    let header: RecordingHeader =
        serde_json::from_str(&text).map_err(|e| Error::MalformedHeader(e.to_string()))?;
    if !(header.sample_rate_hz.is_finite() && header.sample_rate_hz > 0.0) {
        return Err(Error::InvalidSampleRate(header.sample_rate_hz));
    }
    if header.channels.is_empty() {
        return Err(Error::MalformedHeader("no channels".into()));
    }
    let bytes = fs::read(&payload_path).map_err(|e| Error::io(&payload_path, e))?;
    let expected = header.channels.len() * header.n_samples * 4;
    if bytes.len() != expected {
        return Err(Error::PayloadLength {
            expected,
            found: bytes.len(),
        });
    }
    if header.n_samples == 0 {
        return Err(Error::MalformedHeader("n_samples is 0".into()));
    }
    let mut samples = Vec::with_capacity(header.channels.len());
    for (c, chunk) in bytes.chunks_exact(header.n_samples * 4).enumerate() {
        let mut row = Vec::with_capacity(header.n_samples);
        for (i, b) in chunk.chunks_exact(4).enumerate() {
            let v = f32::from_le_bytes([b[0], b[1], b[2], b[3]]);
            if !v.is_finite() {
                return Err(Error::NonFiniteSample { channel: c, index: i });
            }
            row.push(f64::from(v));
        }
        samples.push(row);
    }
    Recording::new(header.patient_id, header.sample_rate_hz, header.channels, samples)
}

/// Samples are narrowed to float32 on write.
pub fn write_recording(path: impl AsRef<Path>, rec: &Recording) -> Result<()> {
    let (header_path, payload_path) = recording_paths(path.as_ref());
    let header = RecordingHeader {
        patient_id: rec.patient_id().to_string(),
        sample_rate_hz: rec.sample_rate_hz(),
        channels: rec.channels().to_vec(),
        n_samples: rec.n_samples(),
    };
    let json = serde_json::to_string_pretty(&header)?;
    fs::write(&header_path, json).map_err(|e| Error::io(&header_path, e))?;
    let mut bytes = Vec::with_capacity(rec.n_channels() * rec.n_samples() * 4);
    for ch in rec.samples() {
        for &v in ch {
            bytes.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    fs::write(&payload_path, bytes).map_err(|e| Error::io(&payload_path, e))
}

#[derive(Debug, Serialize, Deserialize)]
struct AnnotationRow {
    patient_id: String,
    expert_id: String,
    second_index: usize,
    label: u8,
}

/// Reads all tracks, grouped by (patient, expert) in order of first appearance.
pub fn read_annotations(path: impl AsRef<Path>) -> Result<Vec<AnnotationTrack>> {
    let path = path.as_ref();
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::Reader::from_reader(file);
    let mut order: Vec<(String, String)> = Vec::new();
    let mut cells: HashMap<(String, String), BTreeMap<usize, u8>> = HashMap::new();
    for row in reader.deserialize() {
        let row: AnnotationRow = row?;
        if row.label > 1 {
            return Err(Error::InvalidAnnotation(format!(
                "label {} for {}/{} second {}",
                row.label, row.patient_id, row.expert_id, row.second_index
            )));
        }
        let key = (row.patient_id, row.expert_id);
        let slot = cells.entry(key.clone()).or_insert_with(|| {
            order.push(key.clone());
            BTreeMap::new()
        });
        if slot.insert(row.second_index, row.label).is_some() {
            return Err(Error::InvalidAnnotation(format!(
                "duplicate second {} for {}/{}",
                row.second_index, key.0, key.1
            )));
        }
    }
    order
        .into_iter()
        .map(|key| {
            let seconds = &cells[&key];
            if seconds.keys().enumerate().any(|(i, &s)| i != s) {
                return Err(Error::InvalidAnnotation(format!(
                    "seconds for {}/{} are not contiguous from 0",
                    key.0, key.1
                )));
            }
            AnnotationTrack::new(key.0, key.1, seconds.values().copied().collect())
        })
        .collect()
}

pub fn write_annotations(path: impl AsRef<Path>, tracks: &[AnnotationTrack]) -> Result<()> {
    let path = path.as_ref();
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::Writer::from_writer(std::io::BufWriter::new(file));
    for t in tracks {
        for (i, &label) in t.labels().iter().enumerate() {
            w.serialize(AnnotationRow {
                patient_id: t.patient_id.clone(),
                expert_id: t.expert_id.clone(),
                second_index: i,
                label,
            })?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Lossless float formatting with 17 significant digits.
pub fn format_prob(p: f64) -> String {
    format!("{p:.16e}")
}

pub fn write_predictions(path: impl AsRef<Path>, m: &PredictionMatrix) -> Result<()> {
    let path = path.as_ref();
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = std::io::BufWriter::new(file);
    let mut body = String::from("segment_id,detector_id,probability\n");
    for (i, sid) in m.segment_ids().iter().enumerate() {
        for (j, did) in m.detector_ids().iter().enumerate() {
            body.push_str(&format!("{sid},{did},{}\n", format_prob(m.prob(i, j))));
        }
    }
    w.write_all(body.as_bytes()).map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}

#[derive(Debug, Deserialize)]
struct PredictionRow {
    segment_id: String,
    detector_id: String,
    probability: f64,
}

/// Rows may come in any order; segments and detectors keep first-appearance order.
pub fn read_predictions(path: impl AsRef<Path>) -> Result<PredictionMatrix> {
    let path = path.as_ref();
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::Reader::from_reader(file);
    let mut seg_index: HashMap<String, usize> = HashMap::new();
    let mut det_index: HashMap<String, usize> = HashMap::new();
    let mut segs = Vec::new();
    let mut dets = Vec::new();
    let mut cells: HashMap<(usize, usize), f64> = HashMap::new();
    for row in reader.deserialize() {
        let row: PredictionRow = row?;
        let i = *seg_index.entry(row.segment_id.clone()).or_insert_with(|| {
            segs.push(row.segment_id.clone());
            segs.len() - 1
        });
        let j = *det_index.entry(row.detector_id.clone()).or_insert_with(|| {
            dets.push(row.detector_id.clone());
            dets.len() - 1
        });
        if cells.insert((i, j), row.probability).is_some() {
            return Err(Error::Csv(format!(
                "duplicate prediction for {} / {}",
                row.segment_id, row.detector_id
            )));
        }
    }
    let mut probs = Vec::with_capacity(segs.len() * dets.len());
    for (i, sid) in segs.iter().enumerate() {
        for (j, did) in dets.iter().enumerate() {
            let p = cells
                .get(&(i, j))
                .ok_or_else(|| Error::Csv(format!("missing prediction for {sid} / {did}")))?;
            probs.push(*p);
        }
    }
    PredictionMatrix::new(segs, dets, probs)
}
