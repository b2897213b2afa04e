use super::filter::IirFilter;
use crate::coredata::Recording;
use crate::error::{Error, Result};

pub const TARGET_RATE_HZ: f64 = 32.0;
pub const INT16_LIMIT: f64 = 32767.0;

/// Band-pass each channel causally, then keep every k-th sample.
/// The filter doubles as the anti-alias stage.
pub fn filter_and_decimate(rec: &Recording, filter: &IirFilter, target_rate_hz: f64) -> Result<Recording> {
    let rate = rec.sample_rate_hz();
    if (filter.design().sample_rate_hz - rate).abs() > 1e-9 {
        return Err(Error::FilterSpec(format!(
            "filter designed for {} Hz applied to a {rate} Hz recording",
            filter.design().sample_rate_hz
        )));
    }
    let factor = rate / target_rate_hz;
    if !(factor >= 1.0 && (factor - factor.round()).abs() < 1e-9) {
        return Err(Error::DecimationFactor(factor));
    }
    let step = factor.round() as usize;
    let samples = rec
        .samples()
        .iter()
        .map(|ch| filter.apply(ch).into_iter().step_by(step).collect())
        .collect();
    rec.with_samples(target_rate_hz, samples)
}

/// Quantizes at 1 count per microvolt, rounding half away from zero and
/// saturating at ±32767. Returns the rescaled recording and the number of
/// saturated samples.
pub fn rescale_to_int16(rec: &Recording) -> (Recording, usize) {
    let mut saturated = 0;
    let samples = rec
        .samples()
        .iter()
        .map(|ch| {
            ch.iter()
                .map(|&v| {
                    let r = v.round();
                    if r.abs() > INT16_LIMIT {
                        saturated += 1;
                        r.signum() * INT16_LIMIT
                    } else {
                        r
                    }
                })
                .collect()
        })
        .collect();
    let out = rec
        .with_samples(rec.sample_rate_hz(), samples)
        .expect("shape unchanged by rescaling");
    (out, saturated)
}

/// Filter, decimate to 32 Hz and quantize.
pub fn preprocess(rec: &Recording, filter: &IirFilter) -> Result<(Recording, usize)> {
    let decimated = filter_and_decimate(rec, filter, TARGET_RATE_HZ)?;
    Ok(rescale_to_int16(&decimated))
}
