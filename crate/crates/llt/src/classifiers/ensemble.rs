//! Bagged CART trees with row and feature subsampling.

use rand::seq::index::sample;
use rand::Rng;
use rayon::prelude::*;

use super::{Dataset, EnsembleParams, TreeModel, TreeParams};
use crate::error::{Error, Result};
use crate::rng::substream;

/// A fitted bag of trees; prediction is a majority vote, ties to class 0.
pub struct EnsembleModel {
    trees: Vec<TreeModel>,
}

impl EnsembleModel {
    /// Fit `n_trees` trees, each on a seeded resample of rows and a
    /// seeded subset of features.
    ///
    /// A sample fraction of exactly 1.0 uses the training rows as-is
    /// (identity resample), so a one-tree ensemble with full fractions
    /// equals a single tree on the same data. Fractions below 1.0
    /// bootstrap with replacement.
    pub fn fit(
        ds: &Dataset,
        train_idx: &[usize],
        params: &EnsembleParams,
        seed: u64,
    ) -> Result<EnsembleModel> {
        if params.n_trees < 1 {
            return Err(Error::Domain("ensemble needs at least 1 tree".into()));
        }
        for frac in [params.sample_fraction, params.feature_fraction] {
            if !(frac > 0.0 && frac <= 1.0) {
                return Err(Error::Domain(format!(
                    "ensemble fraction {frac} outside (0, 1]"
                )));
            }
        }
        if train_idx.is_empty() {
            return Err(Error::Domain(
                "ensemble needs a non-empty training set".into(),
            ));
        }
        let tree_params = TreeParams {
            max_depth: params.max_depth,
            min_leaf: params.min_leaf,
        };
        let n = train_idx.len();
        let d = ds.feature_count;
        let n_features = ((params.feature_fraction * d as f64).round() as usize).clamp(1, d);
        let n_rows = ((params.sample_fraction * n as f64).round() as usize).clamp(1, n);

        let trees: Vec<Result<TreeModel>> = (0..params.n_trees)
            .into_par_iter()
            .map(|t| {
                let mut rng = substream(seed, &format!("ensemble-tree{t}"));
                let rows: Vec<usize> = if params.sample_fraction == 1.0 {
                    train_idx.to_vec()
                } else {
                    (0..n_rows)
                        .map(|_| train_idx[rng.gen_range(0..n)])
                        .collect()
                };
                let features: Vec<usize> = if n_features == d {
                    (0..d).collect()
                } else {
                    let mut picked = sample(&mut rng, d, n_features).into_vec();
                    picked.sort_unstable();
                    picked
                };
                TreeModel::fit_with_features(ds, &rows, &features, &tree_params)
            })
            .collect();
        let trees = trees.into_iter().collect::<Result<Vec<_>>>()?;
        Ok(EnsembleModel { trees })
    }

    pub fn predict_features(&self, features: &[f64]) -> u8 {
        let ones: usize = self
            .trees
            .iter()
            .filter(|t| t.predict_features(features) == 1)
            .count();
        u8::from(ones * 2 > self.trees.len())
    }

    pub fn predict(&self, ds: &Dataset, query_idx: &[usize]) -> Vec<u8> {
        query_idx
            .iter()
            .map(|&i| self.predict_features(&ds.rows[i].features))
            .collect()
    }
}
