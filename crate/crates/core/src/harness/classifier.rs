//! Least-squares kernel classifier (LS-SVM with bias) over an RBF Gram
//! matrix, evaluated on a fixed 70/30 split.
//!
//! The kernel is `exp(−γ‖a − b‖²)` on standardized features. Training solves
//!
//! ```text
//! [ 0   1ᵀ       ] [b]   [0]
//! [ 1   G + I/C  ] [α] = [y]
//! ```
//!
//! and predicts `sign(Gα + b)`.

use nalgebra::{Cholesky, DMatrix, DVector};
use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::rng::substream;

const BUNDLED: &str = include_str!("../../data/wdbc.csv");
const TRAIN_FRACTION: f64 = 0.7;

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub features: Vec<Vec<f64>>,
    /// ±1 labels.
    pub labels: Vec<f64>,
}

impl Dataset {
    /// CSV with a header row and a `label` column holding −1 or 1.
    pub fn from_csv(text: &str) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(text.as_bytes());
        let headers = rdr.headers()?.clone();
        let label_col = headers
            .iter()
            .position(|h| h == "label")
            .ok_or_else(|| Error::Validation("dataset has no `label` column".into()))?;
        let mut features = Vec::new();
        let mut labels = Vec::new();
        for (row, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let mut x = Vec::with_capacity(rec.len() - 1);
            for (j, field) in rec.iter().enumerate() {
                let v: f64 = field.trim().parse().map_err(|_| {
                    Error::Validation(format!("row {}: `{field}` is not a number", row + 1))
                })?;
                if j == label_col {
                    if v != 1.0 && v != -1.0 {
                        return Err(Error::Validation(format!("row {}: label must be -1 or 1", row + 1)));
                    }
                    labels.push(v);
                } else {
                    x.push(v);
                }
            }
            features.push(x);
        }
        Ok(Self { features, labels })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

/// Bundled Wisconsin diagnostic breast-cancer data (569 rows, 30 features).
pub fn bundled_dataset() -> Result<Dataset> {
    Dataset::from_csv(BUNDLED)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Accuracy {
    pub test: f64,
    pub train: f64,
}

/// A dataset split with cached squared distances, reusable across (C, γ).
#[derive(Debug, Clone)]
pub struct ClassifierTask {
    train_sq: DMatrix<f64>,
    test_sq: DMatrix<f64>,
    y_train: DVector<f64>,
    y_test: Vec<f64>,
}

fn sq_dists(a: &[Vec<f64>], b: &[Vec<f64>]) -> DMatrix<f64> {
    DMatrix::from_fn(a.len(), b.len(), |i, j| {
        a[i].iter().zip(&b[j]).map(|(x, y)| (x - y).powi(2)).sum()
    })
}

impl ClassifierTask {
    pub fn new(data: &Dataset, split_seed: u64) -> Result<Self> {
        if data.len() < 10 {
            return Err(Error::Validation(format!("dataset needs at least 10 rows, got {}", data.len())));
        }
        if data.labels.iter().all(|&y| y == data.labels[0]) {
            return Err(Error::Validation("dataset has a single class".into()));
        }
        let mut order: Vec<usize> = (0..data.len()).collect();
        order.shuffle(&mut substream(split_seed, "split", 0));
        let n_train = (TRAIN_FRACTION * data.len() as f64).round() as usize;
        let (train, test) = order.split_at(n_train);

        let d = data.features[0].len();
        let mean: Vec<f64> = (0..d)
            .map(|j| train.iter().map(|&i| data.features[i][j]).sum::<f64>() / n_train as f64)
            .collect();
        let sd: Vec<f64> = (0..d)
            .map(|j| {
                let v = train
                    .iter()
                    .map(|&i| (data.features[i][j] - mean[j]).powi(2))
                    .sum::<f64>()
                    / n_train as f64;
                if v > 0.0 {
                    v.sqrt()
                } else {
                    1.0
                }
            })
            .collect();
        let scale = |rows: &[usize]| -> Vec<Vec<f64>> {
            rows.iter()
                .map(|&i| (0..d).map(|j| (data.features[i][j] - mean[j]) / sd[j]).collect())
                .collect()
        };
        let (xtr, xte) = (scale(train), scale(test));
        Ok(Self {
            train_sq: sq_dists(&xtr, &xtr),
            test_sq: sq_dists(&xte, &xtr),
            y_train: DVector::from_iterator(n_train, train.iter().map(|&i| data.labels[i])),
            y_test: test.iter().map(|&i| data.labels[i]).collect(),
        })
    }

    pub fn test_labels(&self) -> &[f64] {
        &self.y_test
    }

    pub fn train_labels(&self) -> &[f64] {
        self.y_train.as_slice()
    }

    pub fn accuracy(&self, c: f64, gamma: f64) -> Result<Accuracy> {
        if !(c > 0.0 && gamma > 0.0 && c.is_finite() && gamma.is_finite()) {
            return Err(Error::Validation("C and gamma must be positive".into()));
        }
        let n = self.y_train.len();
        let g = self.train_sq.map(|d| (-gamma * d).exp());
        let mut h = g.clone();
        for i in 0..n {
            h[(i, i)] += 1.0 / c;
        }
        let chol = Cholesky::new(h).ok_or_else(|| Error::Numerical("classifier system not positive definite".into()))?;
        let eta = chol.solve(&DVector::from_element(n, 1.0));
        let nu = chol.solve(&self.y_train);
        let b = nu.sum() / eta.sum();
        let alpha = nu - eta * b;

        let hit_rate = |scores: DVector<f64>, labels: &[f64]| {
            let hits = scores
                .iter()
                .zip(labels)
                .filter(|(s, y)| (if **s + b >= 0.0 { 1.0 } else { -1.0 }) == **y)
                .count();
            hits as f64 / labels.len() as f64
        };
        let test_scores = self.test_sq.map(|d| (-gamma * d).exp()) * &alpha;
        let train_scores = &g * &alpha;
        Ok(Accuracy {
            test: hit_rate(test_scores, &self.y_test),
            train: hit_rate(train_scores, self.y_train.as_slice()),
        })
    }
}

/// Held-out accuracy for one `(C, γ)`.
pub fn classifier_accuracy(c: f64, gamma: f64, data: &Dataset, split_seed: u64) -> Result<super::EvaluationResult> {
    let acc = ClassifierTask::new(data, split_seed)?.accuracy(c, gamma)?;
    Ok(super::EvaluationResult::ok(acc.test).with_aux("train_accuracy", acc.train))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_schema() {
        let d = bundled_dataset().unwrap();
        assert!(d.len() >= 500);
        assert!(d.features.iter().all(|x| x.len() == 30));
    }

    #[test]
    fn heavy_regularization_gives_majority_rate() {
        let task = ClassifierTask::new(&bundled_dataset().unwrap(), 4).unwrap();
        let pos = task.test_labels().iter().filter(|&&y| y > 0.0).count() as f64;
        let n = task.test_labels().len() as f64;
        let majority = (pos / n).max(1.0 - pos / n);
        for gamma in [1e-4, 1e-2, 1.0, 10.0] {
            let acc = task.accuracy(1e-9, gamma).unwrap().test;
            assert!((acc - majority).abs() <= 0.02, "gamma {gamma}: {acc} vs {majority}");
        }
    }

    #[test]
    fn deterministic_and_bounded() {
        let data = bundled_dataset().unwrap();
        let a = classifier_accuracy(10.0, 0.01, &data, 1).unwrap();
        let b = classifier_accuracy(10.0, 0.01, &data, 1).unwrap();
        assert_eq!(a.outcome.to_bits(), b.outcome.to_bits());
        assert!((0.0..=1.0).contains(&a.outcome));
        assert!(a.outcome > 0.9);
    }

    #[test]
    fn rejects_degenerate_data() {
        let small = Dataset {
            features: vec![vec![0.0]; 5],
            labels: vec![1.0, -1.0, 1.0, -1.0, 1.0],
        };
        assert!(ClassifierTask::new(&small, 0).is_err());
        let one = Dataset {
            features: vec![vec![0.0]; 12],
            labels: vec![1.0; 12],
        };
        assert!(ClassifierTask::new(&one, 0).is_err());
        assert!(Dataset::from_csv("a,b\n1,2\n").is_err());
        assert!(Dataset::from_csv("a,label\n1,0\n").is_err());
    }
}
