use crate::coredata::LabelMatrix;
use crate::error::{Error, Result};

/// Gwet's AC1 for R ≥ 2 raters and binary labels.
///
/// `p_a` is the per-item pairwise agreement `Σ_q r_q (r_q − 1) / (R (R − 1))`
/// averaged over items, and `p_e = 2 π (1 − π)` with `π` the overall share
/// of positive ratings.
pub fn gwet_ac1(labels: &LabelMatrix) -> Result<f64> {
    let r = labels.n_raters();
    if r < 2 {
        return Err(Error::Shape(format!("AC1 needs at least 2 raters, got {r}")));
    }
    if labels.n_items() == 0 {
        return Err(Error::Empty("no items to rate".into()));
    }
    let pairs = (r * (r - 1)) as f64;
    let mut agreement = 0.0;
    let mut positives = 0usize;
    for row in labels.rows() {
        let ones = row.iter().filter(|&&y| y == 1).count();
        let zeros = r - ones;
        agreement += (ones * ones.saturating_sub(1) + zeros * zeros.saturating_sub(1)) as f64 / pairs;
        positives += ones;
    }
    let n = labels.n_items() as f64;
    let p_a = agreement / n;
    let pi = positives as f64 / (n * r as f64);
    let p_e = 2.0 * pi * (1.0 - pi);
    Ok((p_a - p_e) / (1.0 - p_e))
}
