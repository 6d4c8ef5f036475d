//! Linear SVM trained by epoch-wise subgradient descent on the primal
//! hinge loss, with the 1/(lambda t) step schedule.
//!
//! Labels map {0,1} -> {-1,+1} and features are standardized from
//! training statistics. The objective `lambda/2 ||w||^2 + mean hinge`
//! with `lambda = 1/(c n)` is evaluated after every epoch and the best
//! iterate is kept, so the returned model never scores worse than the
//! zero vector (objective 1.0).

use rand::seq::SliceRandom;

use super::{Dataset, Standardizer, SvmParams};
use crate::error::{Error, Result};
use crate::rng::substream;

/// A fitted linear decision rule on standardized features.
pub struct SvmModel {
    standardizer: Standardizer,
    pub weights: Vec<f64>,
    pub bias: f64,
    /// Set when training saw a single label; the model is constant.
    pub constant: Option<u8>,
}

impl SvmModel {
    pub fn fit(
        ds: &Dataset,
        train_idx: &[usize],
        params: &SvmParams,
        seed: u64,
    ) -> Result<SvmModel> {
        if !(params.c > 0.0) || params.epochs < 1 {
            return Err(Error::Domain("svm needs c > 0 and at least 1 epoch".into()));
        }
        if train_idx.is_empty() {
            return Err(Error::Domain("svm needs a non-empty training set".into()));
        }
        let standardizer = Standardizer::fit(ds, train_idx);
        let d = ds.feature_count;

        let first_label = ds.rows[train_idx[0]].label;
        if train_idx.iter().all(|&i| ds.rows[i].label == first_label) {
            return Ok(SvmModel {
                standardizer,
                weights: vec![0.0; d],
                bias: 0.0,
                constant: Some(first_label),
            });
        }

        // bias folded in as a constant feature, so it shares the
        // regularization and the projection
        let x: Vec<Vec<f64>> = train_idx
            .iter()
            .map(|&i| {
                let mut xi = standardizer.transform(&ds.rows[i].features);
                xi.push(1.0);
                xi
            })
            .collect();
        let y: Vec<f64> = train_idx
            .iter()
            .map(|&i| if ds.rows[i].label == 1 { 1.0 } else { -1.0 })
            .collect();
        let n = x.len();
        let lambda = 1.0 / (params.c * n as f64);

        let objective = |w: &[f64]| -> f64 {
            let reg = 0.5 * lambda * dot(w, w);
            let hinge: f64 = x
                .iter()
                .zip(y.iter())
                .map(|(xi, &yi)| (1.0 - yi * dot(w, xi)).max(0.0))
                .sum();
            reg + hinge / n as f64
        };

        let mut w = vec![0.0f64; d + 1];
        let mut best = (w.clone(), objective(&w));
        let mut order: Vec<usize> = (0..n).collect();
        let mut rng = substream(seed, "svm-shuffle");
        let radius = 1.0 / lambda.sqrt();
        let mut t = 0u64;
        for _ in 0..params.epochs {
            order.shuffle(&mut rng);
            for &i in &order {
                t += 1;
                let eta = 1.0 / (lambda * t as f64);
                let violated = y[i] * dot(&w, &x[i]) < 1.0;
                let shrink = 1.0 - eta * lambda;
                for wj in w.iter_mut() {
                    *wj *= shrink;
                }
                if violated {
                    let step = eta * y[i];
                    for (wj, xj) in w.iter_mut().zip(x[i].iter()) {
                        *wj += step * xj;
                    }
                }
                // project back onto the ball of radius 1/sqrt(lambda)
                let norm = dot(&w, &w).sqrt();
                if norm > radius {
                    let scale = radius / norm;
                    for wj in w.iter_mut() {
                        *wj *= scale;
                    }
                }
            }
            let obj = objective(&w);
            if obj < best.1 {
                best = (w.clone(), obj);
            }
        }
        let (mut weights, _) = best;
        let bias = weights.pop().unwrap();
        Ok(SvmModel {
            standardizer,
            weights,
            bias,
            constant: None,
        })
    }

    /// Hinge objective of this model over the given rows, with
    /// `lambda = 1/(c n)` and the bias inside the regularized norm.
    pub fn objective(&self, ds: &Dataset, idx: &[usize], c: f64) -> f64 {
        let n = idx.len() as f64;
        let lambda = 1.0 / (c * n);
        let norm2 = dot(&self.weights, &self.weights) + self.bias * self.bias;
        let hinge: f64 = idx
            .iter()
            .map(|&i| {
                let xi = self.standardizer.transform(&ds.rows[i].features);
                let yi = if ds.rows[i].label == 1 { 1.0 } else { -1.0 };
                (1.0 - yi * (dot(&self.weights, &xi) + self.bias)).max(0.0)
            })
            .sum();
        0.5 * lambda * norm2 + hinge / n
    }

    /// Decision value `w . x + b` on standardized features.
    pub fn decision(&self, features: &[f64]) -> f64 {
        let x = self.standardizer.transform(features);
        dot(&self.weights, &x) + self.bias
    }

    pub fn predict_features(&self, features: &[f64]) -> u8 {
        if let Some(label) = self.constant {
            return label;
        }
        // a decision value of exactly zero maps to class 0
        u8::from(self.decision(features) > 0.0)
    }

    pub fn predict(&self, ds: &Dataset, query_idx: &[usize]) -> Vec<u8> {
        query_idx
            .iter()
            .map(|&i| self.predict_features(&ds.rows[i].features))
            .collect()
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| x * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classifiers::DataRow;
    use rand::Rng;

    fn blobs(n_per_class: usize, margin: f64, seed: u64) -> Dataset {
        let mut rng = substream(seed, "svm-test-blobs");
        let mut rows = Vec::new();
        for i in 0..2 * n_per_class {
            let label = u8::from(i % 2 == 1);
            let center = if label == 1 { margin } else { -margin };
            rows.push(DataRow {
                features: vec![center + rng.gen_range(-0.4..0.4), rng.gen_range(-1.0..1.0)],
                label,
                group: i as u64,
            });
        }
        Dataset {
            feature_count: 2,
            rows,
        }
    }

    #[test]
    fn separable_blobs_are_fit_perfectly() {
        let ds = blobs(40, 1.0, 3);
        let idx: Vec<usize> = (0..ds.rows.len()).collect();
        let model = SvmModel::fit(&ds, &idx, &SvmParams { c: 1.0, epochs: 30 }, 5).unwrap();
        let preds = model.predict(&ds, &idx);
        let correct = preds
            .iter()
            .enumerate()
            .filter(|(i, &p)| p == ds.rows[*i].label)
            .count();
        assert_eq!(correct, ds.rows.len());
    }

    #[test]
    fn zero_decision_maps_to_class_zero() {
        let ds = blobs(5, 1.0, 1);
        let model = SvmModel {
            standardizer: Standardizer::fit(&ds, &[0, 1, 2]),
            weights: vec![0.0, 0.0],
            bias: 0.0,
            constant: None,
        };
        assert_eq!(model.decision(&[0.3, -0.7]), 0.0);
        assert_eq!(model.predict_features(&[0.3, -0.7]), 0);
    }

    #[test]
    fn objective_never_exceeds_zero_baseline() {
        // the w = 0 baseline scores exactly 1.0 on any data
        for seed in 0..5u64 {
            let ds = crate::classifiers::test_data::random_labels(60, 4, seed);
            let idx: Vec<usize> = (0..ds.rows.len()).collect();
            let c = 0.7;
            let model = SvmModel::fit(&ds, &idx, &SvmParams { c, epochs: 15 }, seed).unwrap();
            let obj = model.objective(&ds, &idx, c);
            assert!(obj <= 1.0 + 1e-12, "objective {obj} above baseline");
        }
    }

    #[test]
    fn single_label_training_yields_constant_model() {
        let mut ds = blobs(5, 1.0, 2);
        for row in ds.rows.iter_mut() {
            row.label = 1;
        }
        let idx: Vec<usize> = (0..ds.rows.len()).collect();
        let model = SvmModel::fit(&ds, &idx, &SvmParams { c: 1.0, epochs: 5 }, 1).unwrap();
        assert_eq!(model.constant, Some(1));
        assert_eq!(model.predict_features(&[100.0, -100.0]), 1);
    }

    #[test]
    fn same_seed_same_model() {
        let ds = blobs(20, 0.3, 9);
        let idx: Vec<usize> = (0..ds.rows.len()).collect();
        let a = SvmModel::fit(&ds, &idx, &SvmParams { c: 2.0, epochs: 10 }, 77).unwrap();
        let b = SvmModel::fit(&ds, &idx, &SvmParams { c: 2.0, epochs: 10 }, 77).unwrap();
        assert_eq!(a.weights, b.weights);
        assert_eq!(a.bias, b.bias);
    }
}
