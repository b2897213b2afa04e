//! Synthetic multi-channel EEG with rhythmic seizures, artifacts and
//! simulated expert annotations.

use std::f64::consts::TAU;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::coredata::{AnnotationTrack, EventTimeline, Interval, Recording, SEGMENT_DURATION_S, SEGMENT_STEP_S};
use crate::error::{Error, Result};
use crate::rng::derived_rng;

/// Bipolar double-banana montage used when the cohort has 18 channels.
pub const MONTAGE_18: [&str; 18] = [
    "Fp2-F4", "F4-C4", "C4-P4", "P4-O2", "Fp1-F3", "F3-C3", "C3-P3", "P3-O1", "Fp2-F8", "F8-T4", "T4-T6", "T6-O2",
    "Fp1-F7", "F7-T3", "T3-T5", "T5-O1", "Fz-Cz", "Cz-Pz",
];

const PLAN_STREAM: u64 = 0x706c_616e;
const SIGNAL_STREAM: u64 = 0x7369_676e;

/// Class-conditional signal parameters; each range is sampled once per patient.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SignalSpec {
    /// Background standard deviation in microvolts.
    pub background_uv: (f64, f64),
    /// AR(1) coefficient of the background at the recording rate.
    pub background_ar: (f64, f64),
    pub seizure_freq_hz: (f64, f64),
    /// Seizure amplitude relative to the unit-variance background.
    pub seizure_amplitude: (f64, f64),
    /// Share of channels a patient's seizures involve.
    pub involved_fraction: (f64, f64),
    /// Second-harmonic amplitude relative to the fundamental; the third is half of it.
    pub harmonic_ratio: f64,
    pub artifacts_per_hour: (f64, f64),
    pub artifact_duration_s: (u32, u32),
    /// Share of artifacts that are broadband movement bursts rather than rhythmic.
    pub movement_share: f64,
    pub movement_amplitude: (f64, f64),
    pub rhythmic_artifact_amplitude: (f64, f64),
    pub rhythmic_artifact_channels: (usize, usize),
    pub rhythmic_artifact_freq_hz: (f64, f64),
    /// Chance that a recording contains one flat-line dropout.
    pub dropout_probability: f64,
}

impl Default for SignalSpec {
    fn default() -> Self {
        SignalSpec {
            background_uv: (20.0, 30.0),
            background_ar: (0.93, 0.96),
            seizure_freq_hz: (1.0, 5.0),
            seizure_amplitude: (0.7, 1.3),
            involved_fraction: (0.3, 1.0),
            harmonic_ratio: 0.25,
            artifacts_per_hour: (10.0, 30.0),
            artifact_duration_s: (10, 60),
            movement_share: 0.6,
            movement_amplitude: (1.0, 3.0),
            rhythmic_artifact_amplitude: (0.6, 1.6),
            rhythmic_artifact_channels: (2, 6),
            rhythmic_artifact_freq_hz: (0.5, 1.0),
            dropout_probability: 0.2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CohortSpec {
    pub n_patients: usize,
    pub duration_s: u32,
    pub sample_rate_hz: f64,
    pub n_channels: usize,
    /// Mean share of each recording covered by consensus seizures.
    pub seizure_fraction: f64,
    pub mean_seizure_duration_s: f64,
    pub min_seizure_duration_s: u32,
    pub min_gap_s: u32,
    pub n_experts: usize,
    /// Each expert shifts each seizure edge by up to this many seconds.
    pub edge_jitter_s: u32,
    /// Per-expert chance of missing a seizure; the first seizure is never missed.
    pub miss_probability: f64,
    pub signal: SignalSpec,
    pub seed: u64,
}

impl Default for CohortSpec {
    fn default() -> Self {
        CohortSpec {
            n_patients: 12,
            duration_s: 3600,
            sample_rate_hz: 256.0,
            n_channels: 18,
            seizure_fraction: 0.191,
            mean_seizure_duration_s: 114.0,
            min_seizure_duration_s: 30,
            min_gap_s: 30,
            n_experts: 3,
            edge_jitter_s: 3,
            miss_probability: 0.05,
            signal: SignalSpec::default(),
            seed: 1,
        }
    }
}

impl CohortSpec {
    pub fn full_scale() -> Self {
        CohortSpec {
            n_patients: 38,
            ..CohortSpec::default()
        }
    }

    /// Shortest consensus span guaranteed to contain one whole grid-aligned segment.
    fn min_consensus_s(&self) -> u32 {
        SEGMENT_DURATION_S + SEGMENT_STEP_S - 1
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.n_patients == 0 || self.n_channels == 0 || self.n_experts == 0 {
            return bad("patients, channels and experts must be positive".into());
        }
        if !(self.seizure_fraction > 0.0 && self.seizure_fraction < 1.0) {
            return bad(format!("seizure fraction {} must lie in (0, 1)", self.seizure_fraction));
        }
        if self.duration_s <= 2 * SEGMENT_DURATION_S {
            return bad(format!("duration {} s must exceed {} s", self.duration_s, 2 * SEGMENT_DURATION_S));
        }
        if !(self.sample_rate_hz > 0.0) || (self.sample_rate_hz / 32.0).fract() != 0.0 {
            return Err(Error::InvalidSampleRate(self.sample_rate_hz));
        }
        if !(0.0..=1.0).contains(&self.miss_probability) {
            return bad(format!("miss probability {} must lie in [0, 1]", self.miss_probability));
        }
        let needed = self.min_consensus_s() + 2 * self.edge_jitter_s;
        if self.min_seizure_duration_s < needed {
            return bad(format!(
                "minimum seizure duration {} s is below {needed} s, so a whole seizure segment is not guaranteed",
                self.min_seizure_duration_s
            ));
        }
        if self.min_gap_s < self.min_consensus_s() {
            return bad(format!("minimum gap {} s leaves no whole non-seizure segment", self.min_gap_s));
        }
        if self.mean_seizure_duration_s < f64::from(self.min_seizure_duration_s) {
            return bad("mean seizure duration is below the minimum".into());
        }
        let target = self.seizure_fraction * f64::from(self.duration_s);
        if target < f64::from(self.min_seizure_duration_s) / 2.0 {
            return bad(format!(
                "seizure fraction {} of {} s cannot hold a {} s seizure",
                self.seizure_fraction, self.duration_s, self.min_seizure_duration_s
            ));
        }
        let s = &self.signal;
        for (name, (lo, hi)) in [
            ("background_uv", s.background_uv),
            ("background_ar", s.background_ar),
            ("seizure_freq_hz", s.seizure_freq_hz),
            ("seizure_amplitude", s.seizure_amplitude),
            ("involved_fraction", s.involved_fraction),
            ("artifacts_per_hour", s.artifacts_per_hour),
            ("movement_amplitude", s.movement_amplitude),
            ("rhythmic_artifact_amplitude", s.rhythmic_artifact_amplitude),
            ("rhythmic_artifact_freq_hz", s.rhythmic_artifact_freq_hz),
        ] {
            if !(lo.is_finite() && hi.is_finite() && lo >= 0.0 && lo <= hi) {
                return bad(format!("range {name} = ({lo}, {hi}) is invalid"));
            }
        }
        if !(s.background_ar.0 >= 0.0 && s.background_ar.1 < 1.0) {
            return bad(format!("background AR range {:?} must lie in [0, 1)", s.background_ar));
        }
        if s.involved_fraction.1 > 1.0 || !(0.0..=1.0).contains(&s.movement_share) {
            return bad("involved_fraction and movement_share must not exceed 1".into());
        }
        let (d0, d1) = s.artifact_duration_s;
        if d0 == 0 || d0 > d1 || d1 >= self.duration_s {
            return bad(format!("artifact duration range ({d0}, {d1}) is invalid"));
        }
        let (c0, c1) = s.rhythmic_artifact_channels;
        if c0 == 0 || c0 > c1 {
            return bad(format!("rhythmic artifact channel range ({c0}, {c1}) is invalid"));
        }
        if !(s.harmonic_ratio >= 0.0 && s.harmonic_ratio.is_finite()) {
            return bad("harmonic ratio must be non-negative".into());
        }
        Ok(())
    }

    pub fn patient_id(&self, index: usize) -> String {
        format!("P{:02}", index + 1)
    }

    pub fn channel_names(&self) -> Vec<String> {
        if self.n_channels == MONTAGE_18.len() {
            MONTAGE_18.iter().map(|s| s.to_string()).collect()
        } else {
            (0..self.n_channels).map(|i| format!("ch{i:02}")).collect()
        }
    }

    /// Expected largest of `n_experts` independent uniform edge shifts.
    fn expected_max_jitter(&self) -> f64 {
        let j = i64::from(self.edge_jitter_s);
        let n = (2 * j + 1) as f64;
        let e = self.n_experts as i32;
        (-j..=j)
            .map(|v| {
                let below = ((v + j) as f64 / n).powi(e);
                let at = ((v + j + 1) as f64 / n).powi(e);
                v as f64 * (at - below)
            })
            .sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArtifactKind {
    /// Broadband high-amplitude burst.
    Movement,
    /// Narrow-band sinusoid on a few channels.
    Rhythmic,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Artifact {
    pub kind: ArtifactKind,
    pub interval: Interval,
    pub channels: Vec<usize>,
    pub amplitude: f64,
    pub freq_hz: f64,
}

/// Everything about a patient except the samples.
#[derive(Debug, Clone, PartialEq)]
pub struct PatientPlan {
    pub patient_id: String,
    pub seizures: Vec<Interval>,
    pub tracks: Vec<AnnotationTrack>,
    pub artifacts: Vec<Artifact>,
    pub dropout: Option<Interval>,
    pub seizure_freq_hz: f64,
    pub seizure_amplitude: f64,
    pub seizure_channels: Vec<usize>,
    pub ar_coefficient: f64,
    pub background_uv: f64,
}

impl PatientPlan {
    pub fn truth(&self) -> EventTimeline {
        EventTimeline::from_intervals("truth", self.seizures.clone())
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticPatient {
    pub plan: PatientPlan,
    pub recording: Recording,
}

fn uniform<R: Rng + ?Sized>(rng: &mut R, (lo, hi): (f64, f64)) -> f64 {
    if hi > lo {
        rng.random_range(lo..hi)
    } else {
        lo
    }
}

fn layout_seizures<R: Rng + ?Sized>(spec: &CohortSpec, rng: &mut R) -> Result<Vec<Interval>> {
    let t = f64::from(spec.duration_s);
    let target = spec.seizure_fraction * rng.random_range(0.5..1.5) * t;
    let min_d = f64::from(spec.min_seizure_duration_s);
    let shrink = 2.0 * spec.expected_max_jitter();
    let kept = (1.0 - spec.miss_probability).powi(spec.n_experts as i32);
    let shape = 2.0;
    let gamma = Gamma::new(shape, (spec.mean_seizure_duration_s - min_d).max(1e-9) / shape)
        .map_err(|e| Error::Config(e.to_string()))?;

    // draw durations until the expected consensus time reaches the target
    let mut durations: Vec<u32> = Vec::new();
    let mut expected = 0.0;
    while expected < target {
        let keep = if durations.is_empty() { 1.0 } else { kept };
        // the duration that would land exactly on the target
        let needed = (target - expected) / keep + shrink;
        let d = (min_d + gamma.sample(rng)).min(needed).max(min_d).round();
        expected += keep * (d - shrink);
        durations.push(d as u32);
    }
    let total: u32 = durations.iter().sum();
    let n = durations.len() as u32;
    let free = i64::from(spec.duration_s) - i64::from(total) - i64::from(n + 1) * i64::from(spec.min_gap_s);
    if free < 0 {
        return Err(Error::Config(format!(
            "{total} s of seizures with {} s gaps do not fit in {} s",
            spec.min_gap_s, spec.duration_s
        )));
    }
    durations.shuffle(rng);
    let mut cuts: Vec<i64> = (0..n).map(|_| rng.random_range(0..=free)).collect();
    cuts.sort_unstable();
    let mut seizures = Vec::with_capacity(durations.len());
    let mut cursor = 0u32;
    let mut prev_cut = 0i64;
    for (d, cut) in durations.iter().zip(cuts) {
        cursor += spec.min_gap_s + (cut - prev_cut) as u32;
        prev_cut = cut;
        seizures.push(Interval::new(cursor, cursor + d)?);
        cursor += d;
    }
    Ok(seizures)
}

fn expert_tracks<R: Rng + ?Sized>(
    spec: &CohortSpec,
    patient_id: &str,
    seizures: &[Interval],
    rng: &mut R,
) -> Result<Vec<AnnotationTrack>> {
    let j = i64::from(spec.edge_jitter_s);
    let end = i64::from(spec.duration_s);
    (0..spec.n_experts)
        .map(|e| {
            let mut labels = vec![0u8; spec.duration_s as usize];
            for (i, s) in seizures.iter().enumerate() {
                if i > 0 && rng.random_bool(spec.miss_probability) {
                    continue;
                }
                let a = (i64::from(s.start_s) + rng.random_range(-j..=j)).clamp(0, end);
                let b = (i64::from(s.end_s) + rng.random_range(-j..=j)).clamp(0, end);
                labels[a as usize..b.max(a) as usize].fill(1);
            }
            AnnotationTrack::new(patient_id, format!("E{}", e + 1), labels)
        })
        .collect()
}

fn pick_channels<R: Rng + ?Sized>(n_channels: usize, count: usize, rng: &mut R) -> Vec<usize> {
    let mut picked: Vec<usize> = rand::seq::index::sample(rng, n_channels, count.clamp(1, n_channels)).into_vec();
    picked.sort_unstable();
    picked
}

/// Seizure layout, annotations and artifact schedule for one patient.
pub fn plan_patient(spec: &CohortSpec, index: usize) -> Result<PatientPlan> {
    spec.validate()?;
    let mut rng = derived_rng(spec.seed, &[PLAN_STREAM, index as u64]);
    let patient_id = spec.patient_id(index);
    let seizures = layout_seizures(spec, &mut rng)?;
    let tracks = expert_tracks(spec, &patient_id, &seizures, &mut rng)?;
    let s = &spec.signal;
    let c = spec.n_channels;

    let involved = (uniform(&mut rng, s.involved_fraction) * c as f64).ceil() as usize;
    let seizure_channels = pick_channels(c, involved, &mut rng);
    let hours = f64::from(spec.duration_s) / 3600.0;
    let n_artifacts = (uniform(&mut rng, s.artifacts_per_hour) * hours).round() as usize;
    let rhythm_freq = uniform(&mut rng, s.rhythmic_artifact_freq_hz);
    let artifacts = (0..n_artifacts)
        .map(|_| {
            let dur = rng.random_range(s.artifact_duration_s.0..=s.artifact_duration_s.1);
            let start = rng.random_range(0..spec.duration_s - dur);
            let kind = if rng.random_bool(s.movement_share) {
                ArtifactKind::Movement
            } else {
                ArtifactKind::Rhythmic
            };
            let (count, amplitude) = match kind {
                ArtifactKind::Movement => (
                    (rng.random_range(0.3..1.0) * c as f64).ceil() as usize,
                    uniform(&mut rng, s.movement_amplitude),
                ),
                ArtifactKind::Rhythmic => (
                    rng.random_range(s.rhythmic_artifact_channels.0..=s.rhythmic_artifact_channels.1),
                    uniform(&mut rng, s.rhythmic_artifact_amplitude),
                ),
            };
            Ok(Artifact {
                kind,
                interval: Interval::new(start, start + dur)?,
                channels: pick_channels(c, count, &mut rng),
                amplitude,
                freq_hz: rhythm_freq,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    // dropouts go in a seizure-free stretch so no seizure window is lost
    let dropout = if rng.random_bool(s.dropout_probability) {
        let len = rng.random_range(20..=40u32);
        let margin = 20u32;
        let mut gaps = Vec::new();
        let mut prev = 0u32;
        for sz in seizures.iter().chain(std::iter::once(&Interval {
            start_s: spec.duration_s,
            end_s: spec.duration_s + 1,
        })) {
            if sz.start_s >= prev + len + 2 * margin {
                gaps.push((prev + margin, sz.start_s - margin - len));
            }
            prev = sz.end_s;
        }
        if gaps.is_empty() {
            None
        } else {
            let (lo, hi) = gaps[rng.random_range(0..gaps.len())];
            let start = rng.random_range(lo..=hi);
            Some(Interval::new(start, start + len)?)
        }
    } else {
        None
    };

    Ok(PatientPlan {
        patient_id,
        seizures,
        tracks,
        artifacts,
        dropout,
        seizure_freq_hz: uniform(&mut rng, s.seizure_freq_hz),
        seizure_amplitude: uniform(&mut rng, s.seizure_amplitude),
        seizure_channels,
        ar_coefficient: uniform(&mut rng, s.background_ar),
        background_uv: uniform(&mut rng, s.background_uv),
    })
}

/// Renders a plan into samples.
pub fn synthesize(spec: &CohortSpec, index: usize, plan: &PatientPlan) -> Result<Recording> {
    let mut rng = derived_rng(spec.seed, &[SIGNAL_STREAM, index as u64]);
    let fs = spec.sample_rate_hz;
    let n = spec.duration_s as usize * fs as usize;
    let c = spec.n_channels;
    let a = plan.ar_coefficient;
    let innovation = (1.0 - a * a).sqrt();
    let common_mix: f64 = rng.random_range(0.1..0.4);
    let gains: Vec<f64> = (0..c).map(|_| plan.background_uv * rng.random_range(0.7..1.3)).collect();
    let uv = plan.background_uv;

    let mut common = vec![0.0; n];
    let mut state = 0.0;
    for v in common.iter_mut() {
        let e: f64 = rng.sample(StandardNormal);
        state = a * state + innovation * e;
        *v = state;
    }
    let (own_w, common_w) = ((1.0 - common_mix).sqrt(), common_mix.sqrt());
    let mut samples: Vec<Vec<f64>> = (0..c)
        .map(|ch| {
            let mut state = 0.0;
            common
                .iter()
                .map(|&cm| {
                    let e: f64 = rng.sample(StandardNormal);
                    let w: f64 = rng.sample(StandardNormal);
                    state = a * state + innovation * e;
                    gains[ch] * (own_w * (0.95 * state + 0.3 * w) + common_w * cm)
                })
                .collect()
        })
        .collect();

    // rhythmic discharges with harmonics and a slight slowing over each event
    let phases: Vec<f64> = (0..c).map(|_| rng.random_range(0.0..TAU)).collect();
    let channel_gain: Vec<f64> = (0..c).map(|_| rng.random_range(0.5..1.0)).collect();
    let h2 = spec.signal.harmonic_ratio;
    let h3 = h2 / 2.0;
    let norm = (1.0 + h2 * h2 + h3 * h3).sqrt();
    for sz in &plan.seizures {
        let (s0, s1) = (f64::from(sz.start_s), f64::from(sz.end_s));
        let from = sz.start_s as usize * fs as usize;
        let to = (sz.end_s as usize * fs as usize).min(n);
        let mut phase = 0.0;
        for i in from..to {
            let t = i as f64 / fs;
            let progress = (t - s0) / (s1 - s0);
            let f = plan.seizure_freq_hz * (1.05 - 0.1 * progress);
            phase += TAU * f / fs;
            let env = ((t - s0) / 5.0).min((s1 - t) / 5.0).clamp(0.0, 1.0) * plan.seizure_amplitude * uv;
            for &ch in &plan.seizure_channels {
                let p = phase + phases[ch];
                let wave = (p.sin() + h2 * (2.0 * p).sin() + h3 * (3.0 * p).sin()) / norm;
                samples[ch][i] += env * channel_gain[ch] * wave * std::f64::consts::SQRT_2;
            }
        }
    }

    for art in &plan.artifacts {
        let from = art.interval.start_s as usize * fs as usize;
        let to = (art.interval.end_s as usize * fs as usize).min(n);
        for &ch in &art.channels {
            let phase0 = rng.random_range(0.0..TAU);
            for i in from..to {
                samples[ch][i] += match art.kind {
                    ArtifactKind::Movement => uv * art.amplitude * rng.sample::<f64, _>(StandardNormal),
                    ArtifactKind::Rhythmic => {
                        uv * art.amplitude * 2f64.sqrt() * (TAU * art.freq_hz * i as f64 / fs + phase0).sin()
                    }
                };
            }
        }
    }

    if let Some(d) = plan.dropout {
        let from = d.start_s as usize * fs as usize;
        let to = (d.end_s as usize * fs as usize).min(n);
        for ch in samples.iter_mut() {
            ch[from..to].fill(0.0);
        }
    }

    Recording::new(plan.patient_id.clone(), fs, spec.channel_names(), samples)
}

pub fn generate_patient(spec: &CohortSpec, index: usize) -> Result<SyntheticPatient> {
    let plan = plan_patient(spec, index)?;
    let recording = synthesize(spec, index, &plan)?;
    Ok(SyntheticPatient { plan, recording })
}

/// Whole cohort in memory; large cohorts are better generated patient by patient.
pub fn generate_cohort(spec: &CohortSpec) -> Result<Vec<SyntheticPatient>> {
    (0..spec.n_patients).map(|i| generate_patient(spec, i)).collect()
}
