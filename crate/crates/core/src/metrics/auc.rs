use crate::error::{Error, Result};

/// Area under the ROC curve as the Mann–Whitney statistic
/// `P(s⁺ > s⁻) + ½ P(s⁺ = s⁻)`, from midranks in O(n log n).
///
/// The rank sum is accumulated in doubled integer ranks so the result is
/// exactly `(2·wins + ties) / (2·n⁺·n⁻)`.
pub fn auc(scores: &[f64], truth: &[bool]) -> Result<f64> {
    if scores.len() != truth.len() {
        return Err(Error::Shape(format!("{} scores for {} labels", scores.len(), truth.len())));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::Shape("NaN score".into()));
    }
    let n_pos = truth.iter().filter(|&&t| t).count() as u128;
    let n_neg = truth.len() as u128 - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::SingleClass(format!(
            "AUC needs both classes, got {n_pos} positive and {n_neg} negative"
        )));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut doubled_rank_sum: u128 = 0;
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && scores[order[end]] == scores[order[start]] {
            end += 1;
        }
        // 1-based ranks start+1 ..= end share the midrank (start + 1 + end) / 2
        let doubled = (start + 1 + end) as u128;
        let positives = order[start..end].iter().filter(|&&i| truth[i]).count() as u128;
        doubled_rank_sum += doubled * positives;
        start = end;
    }
    let doubled_u = doubled_rank_sum - n_pos * (n_pos + 1);
    Ok(doubled_u as f64 / (2 * n_pos * n_neg) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// O(n²) pairwise oracle.
    pub(crate) fn brute_force(scores: &[f64], truth: &[bool]) -> f64 {
        let (mut twice, mut pairs) = (0u128, 0u128);
        for (i, &ti) in truth.iter().enumerate() {
            for (j, &tj) in truth.iter().enumerate() {
                if ti && !tj {
                    pairs += 1;
                    if scores[i] > scores[j] {
                        twice += 2;
                    } else if scores[i] == scores[j] {
                        twice += 1;
                    }
                }
            }
        }
        twice as f64 / (2 * pairs) as f64
    }

    #[test]
    fn separated() {
        assert_eq!(auc(&[0.1, 0.2, 0.8, 0.9], &[false, false, true, true]).unwrap(), 1.0);
    }

    #[test]
    fn all_ties() {
        assert_eq!(auc(&[0.3; 6], &[true, false, true, false, false, true]).unwrap(), 0.5);
    }

    #[test]
    fn small_example() {
        let s = [0.1, 0.4, 0.35, 0.8];
        let t = [false, false, true, true];
        assert_eq!(brute_force(&s, &t), 0.75);
        assert_eq!(auc(&s, &t).unwrap(), 0.75);
    }

    #[test]
    fn single_class() {
        assert!(matches!(auc(&[0.1, 0.2], &[true, true]), Err(Error::SingleClass(_))));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn equals_brute_force(cells in prop::collection::vec((0u8..20, any::<bool>()), 2..200)) {
                let scores: Vec<f64> = cells.iter().map(|c| c.0 as f64 / 19.0).collect();
                let truth: Vec<bool> = cells.iter().map(|c| c.1).collect();
                prop_assume!(truth.iter().any(|&t| t) && truth.iter().any(|&t| !t));
                prop_assert_eq!(auc(&scores, &truth).unwrap(), brute_force(&scores, &truth));
            }

            #[test]
            fn invariant_under_monotone_transform(cells in prop::collection::vec((0.0f64..1.0, any::<bool>()), 2..100)) {
                let scores: Vec<f64> = cells.iter().map(|c| c.0).collect();
                let truth: Vec<bool> = cells.iter().map(|c| c.1).collect();
                prop_assume!(truth.iter().any(|&t| t) && truth.iter().any(|&t| !t));
                let warped: Vec<f64> = scores.iter().map(|s| (3.0 * s).exp() - 7.0).collect();
                prop_assert_eq!(auc(&scores, &truth).unwrap(), auc(&warped, &truth).unwrap());
            }
        }
    }
}
