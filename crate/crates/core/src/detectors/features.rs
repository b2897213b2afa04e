//! Per-channel hand features of a 16 s, 32 Hz window.

use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::coredata::{Segment, SEGMENT_RATE_HZ, SEGMENT_SAMPLES};
use crate::error::{Error, Result};

pub const N_FEATURES: usize = 7;

pub const FEATURE_NAMES: [&str; N_FEATURES] = [
    "line_length",
    "rms",
    "zero_crossings",
    "log_power_0.5_2hz",
    "log_power_2_4hz",
    "log_power_4_8hz",
    "log_power_8_16hz",
];

/// Band edges in Hz; each band is `[lo, hi)` except the last, which includes 16 Hz.
pub const BANDS: [(f64, f64); 4] = [(0.5, 2.0), (2.0, 4.0), (4.0, 8.0), (8.0, 16.0)];

/// Added to band powers before the logarithm.
pub const POWER_FLOOR: f64 = 1e-6;

/// Band mean-square power from one-sided periodogram bins.
pub fn band_powers(spectrum: &[Complex64], rate_hz: f64) -> [f64; 4] {
    let n = spectrum.len();
    let df = rate_hz / n as f64;
    let norm = (n * n) as f64;
    let mut out = [0.0; 4];
    for (k, x) in spectrum.iter().enumerate().take(n / 2 + 1).skip(1) {
        let f = k as f64 * df;
        // bins strictly inside (0, Nyquist) carry their mirrored twin
        let weight = if 2 * k == n { 1.0 } else { 2.0 };
        let p = weight * x.norm_sqr() / norm;
        for (b, &(lo, hi)) in BANDS.iter().enumerate() {
            let last = b == BANDS.len() - 1;
            if f >= lo && (f < hi || (last && f <= hi)) {
                out[b] += p;
            }
        }
    }
    out
}

/// Reusable FFT plan for 512-sample windows.
#[derive(Clone)]
pub struct FeatureExtractor {
    fft: Arc<dyn Fft<f64>>,
}

impl Default for FeatureExtractor {
    fn default() -> Self {
        FeatureExtractor {
            fft: FftPlanner::new().plan_fft_forward(SEGMENT_SAMPLES),
        }
    }
}

impl std::fmt::Debug for FeatureExtractor {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FeatureExtractor").finish_non_exhaustive()
    }
}

impl FeatureExtractor {
    pub fn channel_features(&self, x: &[f64]) -> Result<[f64; N_FEATURES]> {
        if x.len() < SEGMENT_SAMPLES {
            return Err(Error::Shape(format!(
                "channel has {} samples, a 16 s window needs {SEGMENT_SAMPLES}",
                x.len()
            )));
        }
        let x = &x[..SEGMENT_SAMPLES];
        let line_length: f64 = x.windows(2).map(|w| (w[1] - w[0]).abs()).sum();
        let rms = (x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64).sqrt();
        let zero_crossings = x.windows(2).filter(|w| (w[0] > 0.0) != (w[1] > 0.0)).count() as f64;
        let mut buf: Vec<Complex64> = x.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.fft.process(&mut buf);
        let p = band_powers(&buf, SEGMENT_RATE_HZ as f64);
        Ok([
            line_length,
            rms,
            zero_crossings,
            (p[0] + POWER_FLOOR).ln(),
            (p[1] + POWER_FLOOR).ln(),
            (p[2] + POWER_FLOOR).ln(),
            (p[3] + POWER_FLOOR).ln(),
        ])
    }

    /// Channels × features.
    pub fn extract(&self, segment: &Segment) -> Result<DMatrix<f64>> {
        if segment.data.is_empty() {
            return Err(Error::Shape(format!("segment {} has no channels", segment.id())));
        }
        let mut m = DMatrix::zeros(segment.data.len(), N_FEATURES);
        for (c, ch) in segment.data.iter().enumerate() {
            let f = self.channel_features(ch)?;
            for (l, v) in f.into_iter().enumerate() {
                m[(c, l)] = v;
            }
        }
        Ok(m)
    }
}

pub fn extract_features(segment: &Segment) -> Result<DMatrix<f64>> {
    FeatureExtractor::default().extract(segment)
}

/// Per-feature affine standardization fitted on training rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

/// Standardized values are clipped here so any finite input stays finite downstream.
pub const STANDARDIZED_CLIP: f64 = 1e3;

impl Standardizer {
    pub fn identity(dim: usize) -> Self {
        Standardizer {
            mean: vec![0.0; dim],
            std: vec![1.0; dim],
        }
    }

    /// Statistics over every channel row of every matrix.
    pub fn fit<'a>(matrices: impl IntoIterator<Item = &'a DMatrix<f64>>) -> Result<Self> {
        let mut count = 0usize;
        let mut sum: Vec<f64> = Vec::new();
        let mut sq: Vec<f64> = Vec::new();
        for m in matrices {
            if sum.is_empty() {
                sum = vec![0.0; m.ncols()];
                sq = vec![0.0; m.ncols()];
            }
            if m.ncols() != sum.len() {
                return Err(Error::Shape("feature matrices differ in width".into()));
            }
            for r in 0..m.nrows() {
                for c in 0..m.ncols() {
                    sum[c] += m[(r, c)];
                    sq[c] += m[(r, c)] * m[(r, c)];
                }
                count += 1;
            }
        }
        if count == 0 {
            return Err(Error::Empty("no feature rows to standardize".into()));
        }
        let n = count as f64;
        let mean: Vec<f64> = sum.iter().map(|s| s / n).collect();
        let std = sq
            .iter()
            .zip(&mean)
            .map(|(s, m)| {
                let var = (s / n - m * m).max(0.0);
                if var.sqrt() > 1e-12 {
                    var.sqrt()
                } else {
                    1.0
                }
            })
            .collect();
        Ok(Standardizer { mean, std })
    }

    pub fn apply(&self, m: &DMatrix<f64>) -> DMatrix<f64> {
        DMatrix::from_fn(m.nrows(), m.ncols(), |r, c| {
            let v = (m[(r, c)] - self.mean[c]) / self.std[c];
            if v.is_nan() {
                0.0
            } else {
                v.clamp(-STANDARDIZED_CLIP, STANDARDIZED_CLIP)
            }
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coredata::SegmentLabel;
    use std::f64::consts::PI;

    fn segment(channels: Vec<Vec<f64>>) -> Segment {
        Segment {
            patient_id: "p".into(),
            start_s: 0,
            data: channels,
            label: SegmentLabel::Nonseizure,
        }
    }

    fn sine(freq: f64) -> Vec<f64> {
        (0..SEGMENT_SAMPLES).map(|i| (2.0 * PI * freq * i as f64 / 32.0).sin()).collect()
    }

    /// Band powers by a direct O(n²) DFT, independent of rustfft.
    fn naive_band_powers(x: &[f64]) -> [f64; 4] {
        let n = x.len();
        let mut out = [0.0; 4];
        for k in 1..=n / 2 {
            let (mut re, mut im) = (0.0, 0.0);
            for (t, &v) in x.iter().enumerate() {
                let a = -2.0 * PI * (k * t) as f64 / n as f64;
                re += v * a.cos();
                im += v * a.sin();
            }
            let f = k as f64 * 32.0 / n as f64;
            let w = if 2 * k == n { 1.0 } else { 2.0 };
            let p = w * (re * re + im * im) / (n * n) as f64;
            for (b, &(lo, hi)) in BANDS.iter().enumerate() {
                if f >= lo && (f < hi || (b == 3 && f <= hi)) {
                    out[b] += p;
                }
            }
        }
        out
    }

    #[test]
    fn zero_channel() {
        let f = extract_features(&segment(vec![vec![0.0; SEGMENT_SAMPLES]])).unwrap();
        assert_eq!(f[(0, 0)], 0.0);
        assert_eq!(f[(0, 1)], 0.0);
        assert_eq!(f[(0, 2)], 0.0);
    }

    #[test]
    fn three_hz_sine_lands_in_2_4_band() {
        let x = sine(3.0);
        let f = extract_features(&segment(vec![x.clone()])).unwrap();
        let bands = [f[(0, 3)], f[(0, 4)], f[(0, 5)], f[(0, 6)]];
        assert!(bands[1] > bands[0] && bands[1] > bands[2] && bands[1] > bands[3]);
        let oracle = naive_band_powers(&x);
        // unit sine has mean-square 1/2
        assert!((oracle[1] - 0.5).abs() < 1e-9);
        for b in 0..4 {
            assert!(((oracle[b] + POWER_FLOOR).ln() - bands[b]).abs() < 1e-9, "band {b}");
        }
    }

    #[test]
    fn fft_band_powers_match_naive_dft_on_noise_like_input() {
        let x: Vec<f64> = (0..SEGMENT_SAMPLES).map(|i| ((i * i) % 17) as f64 - 8.0).collect();
        let mut buf: Vec<Complex64> = x.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        FftPlanner::new().plan_fft_forward(SEGMENT_SAMPLES).process(&mut buf);
        let fast = band_powers(&buf, 32.0);
        let slow = naive_band_powers(&x);
        for b in 0..4 {
            assert!((fast[b] - slow[b]).abs() < 1e-9 * slow[b].max(1.0));
        }
    }

    #[test]
    fn identical_channels_identical_rows() {
        let f = extract_features(&segment(vec![sine(5.0), sine(5.0)])).unwrap();
        assert_eq!(f.row(0), f.row(1));
    }

    #[test]
    fn zero_crossings_of_sine() {
        let f = extract_features(&segment(vec![sine(2.0)])).unwrap();
        // 2 Hz over 16 s: 64 crossings, give or take the endpoints
        assert!((f[(0, 2)] - 64.0).abs() <= 1.0, "{}", f[(0, 2)]);
    }

    #[test]
    fn short_channel_rejected() {
        assert!(extract_features(&segment(vec![vec![1.0; 100]])).is_err());
    }

    #[test]
    fn standardizer_centers_and_clips() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 10.0, 3.0, 10.0]);
        let s = Standardizer::fit([&a]).unwrap();
        assert_eq!(s.mean, vec![2.0, 10.0]);
        assert_eq!(s.std, vec![1.0, 1.0]);
        let z = s.apply(&DMatrix::from_row_slice(1, 2, &[f64::INFINITY, f64::NAN]));
        assert_eq!(z[(0, 0)], STANDARDIZED_CLIP);
        assert_eq!(z[(0, 1)], 0.0);
    }
}
