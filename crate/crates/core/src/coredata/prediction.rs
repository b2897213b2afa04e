use crate::error::{Error, Result};

/// Hard-label threshold; a probability exactly at 0.5 counts as seizure.
pub const LABEL_THRESHOLD: f64 = 0.5;

/// N segments × R detectors of seizure probabilities, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionMatrix {
    segment_ids: Vec<String>,
    detector_ids: Vec<String>,
    probs: Vec<f64>,
}

impl PredictionMatrix {
    pub fn new(segment_ids: Vec<String>, detector_ids: Vec<String>, probs: Vec<f64>) -> Result<Self> {
        let (n, r) = (segment_ids.len(), detector_ids.len());
        if probs.len() != n * r {
            return Err(Error::Shape(format!(
                "{} probabilities for {n} segments × {r} detectors",
                probs.len()
            )));
        }
        if let Some(i) = probs.iter().position(|p| !(0.0..=1.0).contains(p)) {
            return Err(Error::Shape(format!(
                "probability {} at segment {} detector {} outside [0, 1]",
                probs[i],
                i / r.max(1),
                i % r.max(1)
            )));
        }
        Ok(PredictionMatrix {
            segment_ids,
            detector_ids,
            probs,
        })
    }

    /// Builds a matrix from per-detector columns with generated ids.
    pub fn from_columns(columns: &[Vec<f64>]) -> Result<Self> {
        let r = columns.len();
        let n = columns.first().map_or(0, Vec::len);
        if columns.iter().any(|c| c.len() != n) {
            return Err(Error::Shape("columns differ in length".into()));
        }
        let mut probs = Vec::with_capacity(n * r);
        for i in 0..n {
            probs.extend(columns.iter().map(|c| c[i]));
        }
        PredictionMatrix::new(
            (0..n).map(|i| i.to_string()).collect(),
            (0..r).map(|j| format!("d{j}")).collect(),
            probs,
        )
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let r = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|row| row.len() != r) {
            return Err(Error::Shape("rows differ in length".into()));
        }
        PredictionMatrix::new(
            (0..n).map(|i| i.to_string()).collect(),
            (0..r).map(|j| format!("d{j}")).collect(),
            rows.concat(),
        )
    }

    pub fn n_segments(&self) -> usize {
        self.segment_ids.len()
    }

    pub fn n_detectors(&self) -> usize {
        self.detector_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn segment_ids(&self) -> &[String] {
        &self.segment_ids
    }

    pub fn detector_ids(&self) -> &[String] {
        &self.detector_ids
    }

    pub fn prob(&self, i: usize, j: usize) -> f64 {
        self.probs[i * self.n_detectors() + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let r = self.n_detectors();
        &self.probs[i * r..(i + 1) * r]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.probs.chunks_exact(self.n_detectors().max(1))
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.n_segments()).map(|i| self.prob(i, j)).collect()
    }

    pub fn hard_label(&self, i: usize, j: usize) -> u8 {
        u8::from(self.prob(i, j) >= LABEL_THRESHOLD)
    }

    pub fn hard_labels(&self) -> LabelMatrix {
        LabelMatrix {
            n: self.n_segments(),
            r: self.n_detectors(),
            data: self.probs.iter().map(|&p| u8::from(p >= LABEL_THRESHOLD)).collect(),
        }
    }

    /// Keeps only the listed detector columns, in the given order.
    pub fn select_detectors(&self, keep: &[usize]) -> Result<Self> {
        if let Some(&bad) = keep.iter().find(|&&j| j >= self.n_detectors()) {
            return Err(Error::Shape(format!("detector index {bad} out of range")));
        }
        let mut probs = Vec::with_capacity(self.n_segments() * keep.len());
        for row in self.rows() {
            probs.extend(keep.iter().map(|&j| row[j]));
        }
        Ok(PredictionMatrix {
            segment_ids: self.segment_ids.clone(),
            detector_ids: keep.iter().map(|&j| self.detector_ids[j].clone()).collect(),
            probs,
        })
    }
}

/// N × R binary labels, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelMatrix {
    n: usize,
    r: usize,
    data: Vec<u8>,
}

impl LabelMatrix {
    pub fn new(n: usize, r: usize, data: Vec<u8>) -> Result<Self> {
        if data.len() != n * r {
            return Err(Error::Shape(format!("{} labels for {n} × {r}", data.len())));
        }
        if data.iter().any(|&y| y > 1) {
            return Err(Error::Shape("labels must be 0 or 1".into()));
        }
        Ok(LabelMatrix { n, r, data })
    }

    pub fn from_rows(rows: &[Vec<u8>]) -> Result<Self> {
        let n = rows.len();
        let r = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|row| row.len() != r) {
            return Err(Error::Shape("rows differ in length".into()));
        }
        LabelMatrix::new(n, r, rows.concat())
    }

    pub fn n_items(&self) -> usize {
        self.n
    }

    pub fn n_raters(&self) -> usize {
        self.r
    }

    pub fn get(&self, i: usize, j: usize) -> u8 {
        self.data[i * self.r + j]
    }

    pub fn row(&self, i: usize) -> &[u8] {
        &self.data[i * self.r..(i + 1) * self.r]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[u8]> {
        self.data.chunks_exact(self.r.max(1))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn threshold_is_inclusive() {
        let m = PredictionMatrix::from_rows(&[vec![0.5, 0.4999]]).unwrap();
        assert_eq!(m.hard_label(0, 0), 1);
        assert_eq!(m.hard_label(0, 1), 0);
    }

    #[test]
    fn rejects_out_of_range() {
        assert!(PredictionMatrix::from_rows(&[vec![1.2]]).is_err());
        assert!(PredictionMatrix::from_rows(&[vec![f64::NAN]]).is_err());
    }

    #[test]
    fn select_keeps_order() {
        let m = PredictionMatrix::from_rows(&[vec![0.1, 0.2, 0.3], vec![0.4, 0.5, 0.6]]).unwrap();
        let s = m.select_detectors(&[2, 0]).unwrap();
        assert_eq!(s.row(1), &[0.6, 0.4]);
        assert_eq!(s.detector_ids(), &["d2".to_string(), "d0".to_string()]);
    }
}
