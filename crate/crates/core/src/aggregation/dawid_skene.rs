//! Two-class Dawid–Skene EM over hard detector labels.
//!
//! Annotator `j` reports seizure with probability `α_j` on true seizures and
//! non-seizure with probability `β_j` on true non-seizures; `t` is the
//! seizure prior. All likelihood arithmetic is done in log space.

use serde::{Deserialize, Serialize};

use super::{mean_aggregate, require_non_empty};
use crate::coredata::{LabelMatrix, PredictionMatrix};
use crate::error::{Error, Result};

/// Bound keeping every parameter inside `[δ, 1 − δ]`.
pub const PARAM_CLAMP: f64 = 1e-10;
pub const DS_EPSILON: f64 = 1e-5;
pub const DS_MAX_ITERATIONS: usize = 5000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DsTheta {
    pub t: f64,
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
}

impl DsTheta {
    pub fn new(t: f64, alpha: Vec<f64>, beta: Vec<f64>) -> Result<Self> {
        if alpha.len() != beta.len() {
            return Err(Error::Shape(format!("{} alphas for {} betas", alpha.len(), beta.len())));
        }
        let in_unit = |v: f64| (0.0..=1.0).contains(&v);
        if !in_unit(t) || !alpha.iter().chain(&beta).all(|&v| in_unit(v)) {
            return Err(Error::Config("Dawid-Skene parameters must lie in [0, 1]".into()));
        }
        Ok(Self { t, alpha, beta })
    }

    pub fn n_annotators(&self) -> usize {
        self.alpha.len()
    }

    pub fn clamped(&self) -> Self {
        Self {
            t: clamp(self.t),
            alpha: self.alpha.iter().map(|&a| clamp(a)).collect(),
            beta: self.beta.iter().map(|&b| clamp(b)).collect(),
        }
    }
}

fn clamp(v: f64) -> f64 {
    v.clamp(PARAM_CLAMP, 1.0 - PARAM_CLAMP)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DawidSkeneState {
    /// Posterior seizure probability per segment under the final parameters.
    pub mu: Vec<f64>,
    pub theta: DsTheta,
    /// Log-likelihood of the initial parameters followed by one entry per iteration.
    pub log_likelihood: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

impl DawidSkeneState {
    pub fn final_log_likelihood(&self) -> f64 {
        *self.log_likelihood.last().expect("trace holds the initial value")
    }
}

/// Per-item `(log a_i + log t, log b_i + log(1 − t))`.
fn joint_log_terms(labels: &LabelMatrix, theta: &DsTheta) -> Result<Vec<(f64, f64)>> {
    if theta.n_annotators() != labels.n_raters() {
        return Err(Error::Shape(format!(
            "{} annotators in theta for {} label columns",
            theta.n_annotators(),
            labels.n_raters()
        )));
    }
    let th = theta.clamped();
    // log P(y | class) for y = 0 and y = 1, per annotator
    let pos: Vec<[f64; 2]> = th.alpha.iter().map(|&a| [(1.0 - a).ln(), a.ln()]).collect();
    let neg: Vec<[f64; 2]> = th.beta.iter().map(|&b| [b.ln(), (1.0 - b).ln()]).collect();
    let (log_t, log_1t) = (th.t.ln(), (1.0 - th.t).ln());
    Ok(labels
        .rows()
        .map(|row| {
            let mut la = log_t;
            let mut lb = log_1t;
            for (j, &y) in row.iter().enumerate() {
                la += pos[j][usize::from(y)];
                lb += neg[j][usize::from(y)];
            }
            (la, lb)
        })
        .collect())
}

fn log_sum_exp(a: f64, b: f64) -> f64 {
    let m = a.max(b);
    m + ((a - m).exp() + (b - m).exp()).ln()
}

/// `Σ_i log(a_i t + b_i (1 − t))` with parameters clamped to `[δ, 1 − δ]`.
pub fn ds_log_likelihood(labels: &LabelMatrix, theta: &DsTheta) -> Result<f64> {
    Ok(joint_log_terms(labels, theta)?
        .into_iter()
        .map(|(la, lb)| log_sum_exp(la, lb))
        .sum())
}

/// Posterior `μ_i = a_i t / (a_i t + b_i (1 − t))`.
pub fn ds_e_step(labels: &LabelMatrix, theta: &DsTheta) -> Result<Vec<f64>> {
    Ok(joint_log_terms(labels, theta)?
        .into_iter()
        .map(|(la, lb)| (la - log_sum_exp(la, lb)).exp())
        .collect())
}

/// Closed-form maximizer given posteriors. A vanishing denominator leaves
/// the affected parameter at 0.5.
pub fn ds_m_step(labels: &LabelMatrix, mu: &[f64]) -> Result<DsTheta> {
    if mu.len() != labels.n_items() {
        return Err(Error::Shape(format!("{} posteriors for {} items", mu.len(), labels.n_items())));
    }
    if labels.n_items() == 0 {
        return Err(Error::Empty("no items".into()));
    }
    let r = labels.n_raters();
    let sum_mu: f64 = mu.iter().sum();
    let sum_nu: f64 = mu.iter().map(|m| 1.0 - m).sum();
    let mut hits = vec![0.0; r];
    let mut rejections = vec![0.0; r];
    for (row, &m) in labels.rows().zip(mu) {
        for (j, &y) in row.iter().enumerate() {
            if y == 1 {
                hits[j] += m;
            } else {
                rejections[j] += 1.0 - m;
            }
        }
    }
    let ratio = |num: f64, den: f64| if den > 0.0 { (num / den).clamp(0.0, 1.0) } else { 0.5 };
    Ok(DsTheta {
        t: sum_mu / mu.len() as f64,
        alpha: hits.iter().map(|&h| ratio(h, sum_mu)).collect(),
        beta: rejections.iter().map(|&q| ratio(q, sum_nu)).collect(),
    })
}

/// EM from the mean-probability initialization until the log-likelihood
/// changes by less than `eps` or `k_max` iterations have run.
pub fn dawid_skene(matrix: &PredictionMatrix, eps: f64, k_max: usize) -> Result<DawidSkeneState> {
    require_non_empty(matrix)?;
    if !(eps > 0.0) {
        return Err(Error::Config(format!("tolerance {eps} must be positive")));
    }
    let labels = matrix.hard_labels();
    let init = mean_aggregate(matrix)?;
    let mut theta = ds_m_step(&labels, &init)?.clamped();
    let mut ll = ds_log_likelihood(&labels, &theta)?;
    let mut trace = vec![ll];
    let mut converged = false;
    let mut k = 0;
    while k < k_max {
        let mu = ds_e_step(&labels, &theta)?;
        theta = ds_m_step(&labels, &mu)?.clamped();
        let next = ds_log_likelihood(&labels, &theta)?;
        trace.push(next);
        k += 1;
        if (next - ll).abs() < eps {
            converged = true;
            break;
        }
        ll = next;
    }
    Ok(DawidSkeneState {
        mu: ds_e_step(&labels, &theta)?,
        theta,
        log_likelihood: trace,
        iterations: k,
        converged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded_rng;
    use rand::Rng;

    fn labels(rows: &[&[u8]]) -> LabelMatrix {
        LabelMatrix::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    fn theta(t: f64, a: &[f64], b: &[f64]) -> DsTheta {
        DsTheta::new(t, a.to_vec(), b.to_vec()).unwrap()
    }

    /// Annotator responses drawn from the generative model.
    fn simulate(n: usize, t: f64, alpha: &[f64], beta: &[f64], seed: u64) -> (Vec<bool>, PredictionMatrix) {
        let mut rng = seeded_rng(seed);
        let truth: Vec<bool> = (0..n).map(|_| rng.random_bool(t)).collect();
        let rows: Vec<Vec<f64>> = truth
            .iter()
            .map(|&y| {
                alpha
                    .iter()
                    .zip(beta)
                    .map(|(&a, &b)| {
                        let says = if y { rng.random_bool(a) } else { !rng.random_bool(b) };
                        if says { 1.0 } else { 0.0 }
                    })
                    .collect()
            })
            .collect();
        (truth, PredictionMatrix::from_rows(&rows).unwrap())
    }

    #[test]
    fn log_likelihood_by_hand() {
        let ll = ds_log_likelihood(&labels(&[&[1]]), &theta(0.5, &[0.8], &[0.6])).unwrap();
        assert!((ll - 0.6f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn chance_annotators_ignore_labels() {
        let y = labels(&[&[1, 0, 1], &[0, 0, 0], &[1, 1, 1], &[0, 1, 0]]);
        let ll = ds_log_likelihood(&y, &theta(0.3, &[0.5; 3], &[0.5; 3])).unwrap();
        assert!((ll - 4.0 * (-3.0 * 2f64.ln())).abs() < 1e-12);
    }

    #[test]
    fn certain_prior_uses_sensitivities_only() {
        let y = labels(&[&[1, 0], &[1, 1]]);
        let ll = ds_log_likelihood(&y, &theta(1.0, &[0.7, 0.6], &[0.9, 0.2])).unwrap();
        let expected = (0.7f64 * 0.4).ln() + (0.7f64 * 0.6).ln();
        assert!((ll - expected).abs() < 1e-8);
    }

    #[test]
    fn e_step_examples() {
        let y = labels(&[&[1, 0], &[0, 0]]);
        for m in ds_e_step(&y, &theta(0.27, &[0.5, 0.5], &[0.5, 0.5])).unwrap() {
            assert!((m - 0.27).abs() < 1e-12);
        }
        let mu = ds_e_step(&labels(&[&[1]]), &theta(0.5, &[0.9], &[0.9])).unwrap();
        assert!((mu[0] - 0.9).abs() < 1e-12);
        let mu = ds_e_step(&y, &theta(0.0, &[0.9, 0.9], &[0.9, 0.9])).unwrap();
        assert!(mu.iter().all(|&m| m < 1e-8));
    }

    #[test]
    fn m_step_examples() {
        let th = ds_m_step(&labels(&[&[1], &[0]]), &[1.0, 0.0]).unwrap();
        assert_eq!((th.t, th.alpha[0], th.beta[0]), (0.5, 1.0, 1.0));
        let th = ds_m_step(&labels(&[&[1], &[0], &[1]]), &[1.0, 1.0, 1.0]).unwrap();
        assert_eq!(th.t, 1.0);
        assert_eq!(th.beta[0], 0.5);
        // hard posteriors give plain sensitivity and specificity
        let y = labels(&[&[1], &[0], &[1], &[0], &[0]]);
        let th = ds_m_step(&y, &[1.0, 1.0, 1.0, 0.0, 0.0]).unwrap();
        assert!((th.alpha[0] - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(th.beta[0], 1.0);
    }

    #[test]
    fn perfect_agreement_is_a_fixed_point() {
        let rows: Vec<Vec<f64>> = [1.0, 0.0, 0.0, 1.0, 0.0, 1.0, 0.0, 0.0]
            .iter()
            .map(|&p| vec![p; 3])
            .collect();
        let s = dawid_skene(&PredictionMatrix::from_rows(&rows).unwrap(), DS_EPSILON, DS_MAX_ITERATIONS).unwrap();
        for (m, r) in s.mu.iter().zip(&rows) {
            assert!((m - r[0]).abs() < 1e-9);
        }
        assert!(s.theta.alpha.iter().chain(&s.theta.beta).all(|&v| v == 1.0 - PARAM_CLAMP));
        assert!((s.theta.t - 3.0 / 8.0).abs() < 1e-9);
    }

    #[test]
    fn single_annotator_keeps_its_labels() {
        let m = PredictionMatrix::from_rows(&[vec![0.9], vec![0.2], vec![0.7], vec![0.1]]).unwrap();
        let s = dawid_skene(&m, DS_EPSILON, DS_MAX_ITERATIONS).unwrap();
        assert_eq!(super::super::threshold_labels(&s.mu, 0.5), vec![true, false, true, false]);
    }

    #[test]
    fn recovers_annotator_quality() {
        let alpha = [0.65, 0.95, 0.8, 0.7, 0.9];
        let beta = [0.9, 0.7, 0.85, 0.95, 0.65];
        let (_, m) = simulate(20_000, 0.2, &alpha, &beta, 5);
        let s = dawid_skene(&m, DS_EPSILON, DS_MAX_ITERATIONS).unwrap();
        assert!(s.converged);
        for j in 0..5 {
            assert!((s.theta.alpha[j] - alpha[j]).abs() < 0.02, "alpha {j}: {}", s.theta.alpha[j]);
            assert!((s.theta.beta[j] - beta[j]).abs() < 0.02, "beta {j}: {}", s.theta.beta[j]);
        }
        assert!((s.theta.t - 0.2).abs() < 0.01);
    }

    #[test]
    fn adversarial_annotator_is_identified() {
        let good_alpha = [0.85, 0.8, 0.9, 0.85];
        let good_beta = [0.9, 0.85, 0.8, 0.9];
        let alpha = [good_alpha.as_slice(), &[0.1]].concat();
        let beta = [good_beta.as_slice(), &[0.1]].concat();
        let (truth, m) = simulate(10_000, 0.3, &alpha, &beta, 9);
        let s = dawid_skene(&m, DS_EPSILON, DS_MAX_ITERATIONS).unwrap();
        assert!(s.theta.alpha[4] < 0.3 && s.theta.beta[4] < 0.3);
        let accuracy = |mu: &[f64]| {
            mu.iter().zip(&truth).filter(|(&p, &y)| (p >= 0.5) == y).count() as f64 / truth.len() as f64
        };
        let without = dawid_skene(&m.select_detectors(&[0, 1, 2, 3]).unwrap(), DS_EPSILON, DS_MAX_ITERATIONS).unwrap();
        // a flipped annotator carries information once identified, so accuracy may rise but must not fall
        let (with, without) = (accuracy(&s.mu), accuracy(&without.mu));
        assert!(with >= without - 0.01, "{with} vs {without}");
    }

    #[test]
    fn trace_is_monotone() {
        let mut rng = seeded_rng(31);
        for seed in 0..30 {
            let r = rng.random_range(2..8);
            let alpha: Vec<f64> = (0..r).map(|_| rng.random_range(0.3..0.99)).collect();
            let beta: Vec<f64> = (0..r).map(|_| rng.random_range(0.3..0.99)).collect();
            let (_, m) = simulate(rng.random_range(5..400), rng.random_range(0.05..0.6), &alpha, &beta, seed);
            let s = dawid_skene(&m, DS_EPSILON, DS_MAX_ITERATIONS).unwrap();
            assert!(s.converged);
            for w in s.log_likelihood.windows(2) {
                assert!(w[1] >= w[0] - 1e-9, "{} -> {}", w[0], w[1]);
            }
        }
    }

    #[test]
    fn many_annotators_do_not_underflow() {
        let alpha = vec![0.8; 300];
        let beta = vec![0.75; 300];
        let (truth, m) = simulate(200, 0.4, &alpha, &beta, 3);
        let s = dawid_skene(&m, DS_EPSILON, DS_MAX_ITERATIONS).unwrap();
        assert!(s.mu.iter().all(|m| m.is_finite()));
        assert!(s.log_likelihood.iter().all(|l| l.is_finite()));
        let correct = s.mu.iter().zip(&truth).filter(|(&p, &y)| (p >= 0.5) == y).count();
        assert_eq!(correct, truth.len());
    }

    #[test]
    fn column_and_row_permutations() {
        let (_, m) = simulate(300, 0.3, &[0.8, 0.7, 0.9], &[0.9, 0.8, 0.7], 4);
        let base = dawid_skene(&m, DS_EPSILON, DS_MAX_ITERATIONS).unwrap();
        let cols = dawid_skene(&m.select_detectors(&[2, 0, 1]).unwrap(), DS_EPSILON, DS_MAX_ITERATIONS).unwrap();
        for (a, b) in base.mu.iter().zip(&cols.mu) {
            assert!((a - b).abs() < 1e-6);
        }
        let mut reversed: Vec<Vec<f64>> = m.rows().map(<[f64]>::to_vec).collect();
        reversed.reverse();
        let rows = dawid_skene(&PredictionMatrix::from_rows(&reversed).unwrap(), DS_EPSILON, DS_MAX_ITERATIONS).unwrap();
        for (a, b) in base.mu.iter().zip(rows.mu.iter().rev()) {
            assert!((a - b).abs() < 1e-6);
        }
    }

    #[test]
    fn iteration_cap_is_respected() {
        let (_, m) = simulate(500, 0.3, &[0.8, 0.7, 0.9], &[0.9, 0.8, 0.7], 8);
        let s = dawid_skene(&m, 1e-300, 3).unwrap();
        assert_eq!(s.iterations, 3);
        assert_eq!(s.log_likelihood.len(), 4);
        assert!(!s.converged);
    }
}
