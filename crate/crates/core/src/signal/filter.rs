//! Chebyshev type II band-pass design as a cascade of second-order sections.
//!
//! The analog low-pass prototype has its stopband edge at 1 rad/s. It is
//! moved to a band-pass whose stopband edges are the prewarped band edges,
//! then mapped to the z-plane with the bilinear transform. The declared
//! order is the band-pass order, so the prototype has half of it.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Biquad {
    pub b0: f64,
    pub b1: f64,
    pub b2: f64,
    pub a1: f64,
    pub a2: f64,
}

impl Biquad {
    fn response(&self, zinv: Complex64) -> Complex64 {
        let z2 = zinv * zinv;
        (self.b0 + self.b1 * zinv + self.b2 * z2) / (1.0 + self.a1 * zinv + self.a2 * z2)
    }

    pub fn poles(&self) -> [Complex64; 2] {
        quadratic_roots(self.a1, self.a2)
    }

    pub fn zeros(&self) -> [Complex64; 2] {
        quadratic_roots(self.b1 / self.b0, self.b2 / self.b0)
    }
}

/// Roots of z² + c1 z + c2.
fn quadratic_roots(c1: f64, c2: f64) -> [Complex64; 2] {
    let disc = Complex64::new(c1 * c1 - 4.0 * c2, 0.0).sqrt();
    [(-c1 + disc) / 2.0, (-c1 - disc) / 2.0]
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FilterDesign {
    pub order: usize,
    pub f_low_hz: f64,
    pub f_high_hz: f64,
    pub stopband_atten_db: f64,
    pub sample_rate_hz: f64,
}

impl FilterDesign {
    /// 6th order, 0.5–16 Hz, 40 dB stopband.
    pub fn eeg_default(sample_rate_hz: f64) -> Self {
        FilterDesign {
            order: 6,
            f_low_hz: 0.5,
            f_high_hz: 16.0,
            stopband_atten_db: 40.0,
            sample_rate_hz,
        }
    }

    fn validate(&self) -> Result<()> {
        let nyquist = self.sample_rate_hz / 2.0;
        if self.order == 0 || self.order % 2 != 0 {
            return Err(Error::FilterSpec(format!("order {} must be even and positive", self.order)));
        }
        if !(self.sample_rate_hz.is_finite() && self.sample_rate_hz > 0.0) {
            return Err(Error::InvalidSampleRate(self.sample_rate_hz));
        }
        if !(self.f_low_hz > 0.0 && self.f_low_hz < self.f_high_hz && self.f_high_hz < nyquist) {
            return Err(Error::FilterSpec(format!(
                "band edges {} Hz and {} Hz must satisfy 0 < low < high < {nyquist} Hz (Nyquist)",
                self.f_low_hz, self.f_high_hz
            )));
        }
        if !(self.stopband_atten_db.is_finite() && self.stopband_atten_db > 0.0) {
            return Err(Error::FilterSpec(format!(
                "stopband attenuation {} dB must be positive",
                self.stopband_atten_db
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IirFilter {
    sections: Vec<Biquad>,
    design: FilterDesign,
}

impl IirFilter {
    pub fn sections(&self) -> &[Biquad] {
        &self.sections
    }

    pub fn design(&self) -> &FilterDesign {
        &self.design
    }

    pub fn order(&self) -> usize {
        2 * self.sections.len()
    }

    pub fn response(&self, freq_hz: f64) -> Complex64 {
        let omega = 2.0 * std::f64::consts::PI * freq_hz / self.design.sample_rate_hz;
        let zinv = Complex64::from_polar(1.0, -omega);
        self.sections
            .iter()
            .fold(Complex64::new(1.0, 0.0), |acc, s| acc * s.response(zinv))
    }

    pub fn magnitude(&self, freq_hz: f64) -> f64 {
        self.response(freq_hz).norm()
    }

    pub fn magnitude_db(&self, freq_hz: f64) -> f64 {
        20.0 * self.magnitude(freq_hz).log10()
    }

    pub fn poles(&self) -> Vec<Complex64> {
        self.sections.iter().flat_map(|s| s.poles()).collect()
    }

    /// Causal filtering from rest, section by section (transposed direct form II).
    pub fn apply(&self, input: &[f64]) -> Vec<f64> {
        let mut y = input.to_vec();
        for s in &self.sections {
            let (mut z1, mut z2) = (0.0, 0.0);
            for v in y.iter_mut() {
                let x = *v;
                let out = s.b0 * x + z1;
                z1 = s.b1 * x - s.a1 * out + z2;
                z2 = s.b2 * x - s.a2 * out;
                *v = out;
            }
        }
        y
    }
}

fn cheby2_prototype(n: usize, atten_db: f64) -> (Vec<Complex64>, Vec<Complex64>, f64) {
    use std::f64::consts::PI;
    let de = 1.0 / (10f64.powf(0.1 * atten_db) - 1.0).sqrt();
    let mu = (1.0 / de).asinh() / n as f64;
    let mut zeros = Vec::new();
    let mut poles = Vec::new();
    for i in 0..n {
        let m = 2.0 * i as f64 - (n as f64 - 1.0);
        if m != 0.0 {
            let z = Complex64::new(0.0, 1.0) / (m * PI / (2.0 * n as f64)).sin();
            zeros.push(-z.conj());
        }
        let e = -Complex64::from_polar(1.0, PI * m / (2.0 * n as f64));
        let p = Complex64::new(mu.sinh() * e.re, mu.cosh() * e.im);
        poles.push(1.0 / p);
    }
    let num: Complex64 = poles.iter().map(|p| -p).product();
    let den: Complex64 = zeros.iter().map(|z| -z).product();
    (zeros, poles, (num / den).re)
}

fn lowpass_to_bandpass(
    zeros: &[Complex64],
    poles: &[Complex64],
    gain: f64,
    center: f64,
    bandwidth: f64,
) -> (Vec<Complex64>, Vec<Complex64>, f64) {
    let split = |roots: &[Complex64]| -> Vec<Complex64> {
        let mut out = Vec::with_capacity(2 * roots.len());
        for &r in roots {
            let half = r * bandwidth / 2.0;
            let disc = (half * half - center * center).sqrt();
            out.push(half + disc);
            out.push(half - disc);
        }
        out
    };
    let degree = poles.len() - zeros.len();
    let mut z = split(zeros);
    z.extend(std::iter::repeat_n(Complex64::new(0.0, 0.0), degree));
    (z, split(poles), gain * bandwidth.powi(degree as i32))
}

fn bilinear(
    zeros: &[Complex64],
    poles: &[Complex64],
    gain: f64,
    fs: f64,
) -> (Vec<Complex64>, Vec<Complex64>, f64) {
    let fs2 = 2.0 * fs;
    let map = |r: &Complex64| (fs2 + r) / (fs2 - r);
    let mut z: Vec<Complex64> = zeros.iter().map(map).collect();
    let p: Vec<Complex64> = poles.iter().map(map).collect();
    z.extend(std::iter::repeat_n(Complex64::new(-1.0, 0.0), poles.len() - zeros.len()));
    let num: Complex64 = zeros.iter().map(|r| fs2 - r).product();
    let den: Complex64 = poles.iter().map(|r| fs2 - r).product();
    (z, p, gain * (num / den).re)
}

/// Groups conjugate pairs and leftover real roots into quadratic factors.
fn quadratic_factors(roots: &[Complex64]) -> Vec<[Complex64; 2]> {
    let tol = 1e-9;
    let mut complex: Vec<Complex64> = roots.iter().copied().filter(|r| r.im > tol).collect();
    let mut real: Vec<f64> = roots.iter().filter(|r| r.im.abs() <= tol).map(|r| r.re).collect();
    complex.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
    real.sort_by(f64::total_cmp);
    let mut out: Vec<[Complex64; 2]> = complex.into_iter().map(|c| [c, c.conj()]).collect();
    for pair in real.chunks(2) {
        let a = Complex64::new(pair[0], 0.0);
        let b = pair.get(1).map_or(Complex64::new(0.0, 0.0), |&v| Complex64::new(v, 0.0));
        out.push([a, b]);
    }
    out
}

fn factor_coeffs(f: &[Complex64; 2]) -> (f64, f64) {
    (-(f[0] + f[1]).re, (f[0] * f[1]).re)
}

fn nearest_distance(a: &[Complex64; 2], b: &[Complex64; 2]) -> f64 {
    a.iter()
        .flat_map(|x| b.iter().map(move |y| (x - y).norm()))
        .fold(f64::INFINITY, f64::min)
}

pub fn design_cheby2_bandpass(
    order: usize,
    f_low_hz: f64,
    f_high_hz: f64,
    stopband_atten_db: f64,
    sample_rate_hz: f64,
) -> Result<IirFilter> {
    let design = FilterDesign {
        order,
        f_low_hz,
        f_high_hz,
        stopband_atten_db,
        sample_rate_hz,
    };
    design_from(design)
}

pub fn design_from(design: FilterDesign) -> Result<IirFilter> {
    design.validate()?;
    let fs = design.sample_rate_hz;
    let warp = |f: f64| 2.0 * fs * (std::f64::consts::PI * f / fs).tan();
    let (w_low, w_high) = (warp(design.f_low_hz), warp(design.f_high_hz));

    let (z, p, k) = cheby2_prototype(design.order / 2, design.stopband_atten_db);
    let (z, p, k) = lowpass_to_bandpass(&z, &p, k, (w_low * w_high).sqrt(), w_high - w_low);
    let (z, p, k) = bilinear(&z, &p, k, fs);

    let mut pole_factors = quadratic_factors(&p);
    let mut zero_factors = quadratic_factors(&z);
    if pole_factors.len() != zero_factors.len() {
        return Err(Error::FilterSpec("pole and zero counts do not pair".into()));
    }
    // Poles nearest the unit circle claim their closest zeros first and go last in the cascade.
    let radius = |f: &[Complex64; 2]| f[0].norm().max(f[1].norm());
    pole_factors.sort_by(|a, b| radius(b).total_cmp(&radius(a)));
    let mut sections = Vec::with_capacity(pole_factors.len());
    for pf in &pole_factors {
        let best = (0..zero_factors.len())
            .min_by(|&i, &j| {
                nearest_distance(pf, &zero_factors[i]).total_cmp(&nearest_distance(pf, &zero_factors[j]))
            })
            .expect("zero factors remain while pole factors remain");
        let zf = zero_factors.swap_remove(best);
        let (b1, b2) = factor_coeffs(&zf);
        let (a1, a2) = factor_coeffs(pf);
        sections.push(Biquad {
            b0: 1.0,
            b1,
            b2,
            a1,
            a2,
        });
    }
    sections.reverse();
    if let Some(first) = sections.first_mut() {
        first.b0 *= k;
        first.b1 *= k;
        first.b2 *= k;
    }

    let filter = IirFilter { sections, design };
    if let Some(worst) = filter.poles().iter().map(|p| p.norm()).max_by(f64::total_cmp) {
        if worst >= 1.0 {
            return Err(Error::UnstableFilter(worst));
        }
    }
    Ok(filter)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn eeg() -> IirFilter {
        design_cheby2_bandpass(6, 0.5, 16.0, 40.0, 256.0).unwrap()
    }

    /// |H| evaluated directly from the pole/zero product, independent of the biquads.
    fn zpk_magnitude(f: &IirFilter, freq: f64) -> f64 {
        let z = Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * freq / f.design.sample_rate_hz);
        let mut h = Complex64::new(1.0, 0.0);
        for s in f.sections() {
            let [z1, z2] = s.zeros();
            let [p1, p2] = s.poles();
            h *= s.b0 * (z - z1) * (z - z2) / ((z - p1) * (z - p2));
        }
        h.norm()
    }

    #[test]
    fn below_low_edge_is_attenuated() {
        let bound = 10f64.powf(-40.0 / 20.0) * 10f64.powf(0.5 / 20.0);
        assert!(eeg().magnitude(0.1) <= bound, "{}", eeg().magnitude(0.1));
        assert!(zpk_magnitude(&eeg(), 0.1) <= bound);
    }

    #[test]
    fn geometric_center_gain_near_unity() {
        let db = eeg().magnitude_db((0.5f64 * 16.0).sqrt());
        assert!(db.abs() <= 1.0, "{db}");
    }

    #[test]
    fn stopband_sweep() {
        let f = eeg();
        let limit = -40.0 + 0.5;
        let mut freq = 0.0;
        while freq <= 0.5 {
            assert!(f.magnitude_db(freq) <= limit, "{freq} Hz: {}", f.magnitude_db(freq));
            freq += 0.005;
        }
        let mut freq = 16.0;
        while freq <= 128.0 {
            assert!(f.magnitude_db(freq) <= limit, "{freq} Hz: {}", f.magnitude_db(freq));
            freq += 0.25;
        }
    }

    #[test]
    fn cascade_matches_declared_order() {
        let f = eeg();
        assert_eq!(f.order(), 6);
        assert_eq!(f.sections().len(), 3);
        assert!(f.poles().iter().all(|p| p.norm() < 1.0));
    }

    #[test]
    fn nyquist_violation() {
        let err = design_cheby2_bandpass(6, 0.5, 200.0, 40.0, 256.0).unwrap_err();
        assert!(err.to_string().contains("Nyquist"), "{err}");
    }

    #[test]
    fn rejects_odd_order_and_bad_attenuation() {
        assert!(design_cheby2_bandpass(5, 0.5, 16.0, 40.0, 256.0).is_err());
        assert!(design_cheby2_bandpass(6, 0.5, 16.0, 0.0, 256.0).is_err());
        assert!(design_cheby2_bandpass(6, 16.0, 0.5, 40.0, 256.0).is_err());
    }

    #[test]
    fn impulse_response_matches_frequency_response() {
        // DFT of a long impulse response against the analytic response.
        let f = eeg();
        let mut impulse = vec![0.0; 1 << 15];
        impulse[0] = 1.0;
        let h = f.apply(&impulse);
        for freq in [1.0, 2.83, 7.0, 20.0] {
            let w = 2.0 * std::f64::consts::PI * freq / 256.0;
            let dft: Complex64 = h
                .iter()
                .enumerate()
                .map(|(n, &v)| v * Complex64::from_polar(1.0, -w * n as f64))
                .sum();
            assert!((dft - f.response(freq)).norm() < 1e-8, "{freq}");
        }
    }
}
