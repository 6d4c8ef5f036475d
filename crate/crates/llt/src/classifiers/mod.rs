//! From-scratch classifier suite with grouped cross-validation and
//! seeded random hyperparameter search.
//!
//! All four classifiers consume the same row-oriented [`Dataset`], where
//! each row carries a group id: the rows of one classification instance
//! share a group, folds are assigned at the group level, and instance
//! predictions are majority votes over row predictions. Distance- and
//! margin-based models (KNN, SVM) standardize features internally from
//! training statistics; trees consume raw features.

mod cv;
mod ensemble;
mod knn;
mod report;
mod svm;
mod tree;
mod tune;

pub use cv::{assign_group_folds, cross_validate, CvOutcome};
pub use ensemble::EnsembleModel;
pub use knn::fit_predict_knn;
pub use report::{render_summary_table, Condition, EvalReport, SummaryEntry};
pub use svm::SvmModel;
pub use tree::TreeModel;
pub use tune::{tune, TuneOutcome};

use crate::error::{Error, Result};
use crate::transform::TransformedDataset;
use crate::windowing::InstanceWindow;

/// One sample row: feature vector, binary label, and the instance group
/// it belongs to.
#[derive(Debug, Clone, PartialEq)]
pub struct DataRow {
    pub features: Vec<f64>,
    pub label: u8,
    pub group: u64,
}

/// Row-oriented dataset shared by every classifier.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub feature_count: usize,
    pub rows: Vec<DataRow>,
}

impl Dataset {
    pub fn validate(&self) -> Result<()> {
        if self.rows.is_empty() {
            return Err(Error::Domain("empty dataset".into()));
        }
        let mut seen = [false; 2];
        for (i, row) in self.rows.iter().enumerate() {
            if row.features.len() != self.feature_count {
                return Err(Error::Domain(format!(
                    "row {i} has {} features, expected {}",
                    row.features.len(),
                    self.feature_count
                )));
            }
            if !row.features.iter().all(|x| x.is_finite()) {
                return Err(Error::Domain(format!("non-finite feature in row {i}")));
            }
            if row.label > 1 {
                return Err(Error::Domain(format!("label {} not 0/1", row.label)));
            }
            seen[row.label as usize] = true;
        }
        if !(seen[0] && seen[1]) {
            return Err(Error::Domain("dataset must contain both labels".into()));
        }
        Ok(())
    }

    /// Rows from a transformed test set, groups keyed by instance id.
    pub fn from_transformed(t: &TransformedDataset) -> Dataset {
        Dataset {
            feature_count: t.feature_count,
            rows: t
                .rows
                .iter()
                .map(|r| DataRow {
                    features: r.features.clone(),
                    label: r.label,
                    group: r.instance_id,
                })
                .collect(),
        }
    }

    /// Raw baseline: one row per instance with the observed matrix
    /// flattened row-major (time-major), group = instance id.
    pub fn raw_flattened(instances: &[&InstanceWindow]) -> Dataset {
        let feature_count = instances.first().map_or(0, |i| i.x.rows() * i.x.cols());
        Dataset {
            feature_count,
            rows: instances
                .iter()
                .map(|inst| DataRow {
                    features: inst.x.data().to_vec(),
                    label: inst.label,
                    group: inst.instance_id,
                })
                .collect(),
        }
    }
}

/// Which classifier to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassifierKind {
    Knn,
    Tree,
    SvmLinear,
    Ensemble,
}

impl ClassifierKind {
    pub const ALL: [ClassifierKind; 4] = [
        ClassifierKind::Ensemble,
        ClassifierKind::Knn,
        ClassifierKind::Tree,
        ClassifierKind::SvmLinear,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            ClassifierKind::Knn => "knn",
            ClassifierKind::Tree => "tree",
            ClassifierKind::SvmLinear => "svm_linear",
            ClassifierKind::Ensemble => "ensemble",
        }
    }
}

impl std::str::FromStr for ClassifierKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_lowercase().as_str() {
            "knn" => Ok(ClassifierKind::Knn),
            "tree" | "dt" => Ok(ClassifierKind::Tree),
            "svm" | "svm_linear" => Ok(ClassifierKind::SvmLinear),
            "ensemble" | "ens" => Ok(ClassifierKind::Ensemble),
            other => Err(Error::Domain(format!("unknown classifier {other:?}"))),
        }
    }
}

impl std::fmt::Display for ClassifierKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Neighbor vote weighting for KNN.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Weighting {
    Uniform,
    InverseDistance,
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct KnnParams {
    pub k: usize,
    pub weighting: Weighting,
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct TreeParams {
    pub max_depth: usize,
    pub min_leaf: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SvmParams {
    /// Regularization strength; the subgradient schedule uses
    /// lambda = 1 / (c * n).
    pub c: f64,
    pub epochs: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct EnsembleParams {
    pub n_trees: usize,
    pub sample_fraction: f64,
    pub feature_fraction: f64,
    pub max_depth: usize,
    pub min_leaf: usize,
}

/// A classifier kind together with its hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(untagged)]
pub enum ClassifierSpec {
    Knn(KnnParams),
    Tree(TreeParams),
    SvmLinear(SvmParams),
    Ensemble(EnsembleParams),
}

impl ClassifierSpec {
    pub fn kind(&self) -> ClassifierKind {
        match self {
            ClassifierSpec::Knn(_) => ClassifierKind::Knn,
            ClassifierSpec::Tree(_) => ClassifierKind::Tree,
            ClassifierSpec::SvmLinear(_) => ClassifierKind::SvmLinear,
            ClassifierSpec::Ensemble(_) => ClassifierKind::Ensemble,
        }
    }

    /// Fixed sane defaults, used when no search budget is spent.
    pub fn default_for(kind: ClassifierKind) -> ClassifierSpec {
        match kind {
            ClassifierKind::Knn => ClassifierSpec::Knn(KnnParams {
                k: 5,
                weighting: Weighting::Uniform,
            }),
            ClassifierKind::Tree => ClassifierSpec::Tree(TreeParams {
                max_depth: 8,
                min_leaf: 5,
            }),
            ClassifierKind::SvmLinear => {
                ClassifierSpec::SvmLinear(SvmParams { c: 1.0, epochs: 20 })
            }
            ClassifierKind::Ensemble => ClassifierSpec::Ensemble(EnsembleParams {
                n_trees: 50,
                sample_fraction: 0.8,
                feature_fraction: 0.8,
                max_depth: 8,
                min_leaf: 5,
            }),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            ClassifierSpec::Knn(p) => {
                if p.k < 1 {
                    return Err(Error::Domain("knn k must be at least 1".into()));
                }
            }
            ClassifierSpec::Tree(p) => {
                if p.max_depth < 1 || p.min_leaf < 1 {
                    return Err(Error::Domain(
                        "tree max_depth and min_leaf must be at least 1".into(),
                    ));
                }
            }
            ClassifierSpec::SvmLinear(p) => {
                if !(p.c > 0.0) || p.epochs < 1 {
                    return Err(Error::Domain("svm needs c > 0 and at least 1 epoch".into()));
                }
            }
            ClassifierSpec::Ensemble(p) => {
                if p.n_trees < 1 {
                    return Err(Error::Domain("ensemble needs at least 1 tree".into()));
                }
                for frac in [p.sample_fraction, p.feature_fraction] {
                    if !(frac > 0.0 && frac <= 1.0) {
                        return Err(Error::Domain(format!(
                            "ensemble fraction {frac} outside (0, 1]"
                        )));
                    }
                }
                if p.max_depth < 1 || p.min_leaf < 1 {
                    return Err(Error::Domain(
                        "ensemble tree params must be at least 1".into(),
                    ));
                }
            }
        }
        Ok(())
    }
}

/// Train on `train_idx` rows and predict labels for `query_idx` rows.
pub fn fit_predict(
    ds: &Dataset,
    train_idx: &[usize],
    query_idx: &[usize],
    spec: &ClassifierSpec,
    seed: u64,
) -> Result<Vec<u8>> {
    spec.validate()?;
    match spec {
        ClassifierSpec::Knn(p) => knn::fit_predict_knn(ds, train_idx, query_idx, p),
        ClassifierSpec::Tree(p) => {
            let model = TreeModel::fit(ds, train_idx, p)?;
            Ok(model.predict(ds, query_idx))
        }
        ClassifierSpec::SvmLinear(p) => {
            let model = SvmModel::fit(ds, train_idx, p, seed)?;
            Ok(model.predict(ds, query_idx))
        }
        ClassifierSpec::Ensemble(p) => {
            let model = EnsembleModel::fit(ds, train_idx, p, seed)?;
            Ok(model.predict(ds, query_idx))
        }
    }
}

/// Per-feature standardization from training statistics. Features with
/// (near) zero spread pass through unscaled.
pub(crate) struct Standardizer {
    mean: Vec<f64>,
    scale: Vec<f64>,
}

impl Standardizer {
    pub(crate) fn fit(ds: &Dataset, idx: &[usize]) -> Standardizer {
        let d = ds.feature_count;
        let n = idx.len().max(1) as f64;
        let mut mean = vec![0.0; d];
        for &i in idx {
            for (j, &x) in ds.rows[i].features.iter().enumerate() {
                mean[j] += x;
            }
        }
        for m in mean.iter_mut() {
            *m /= n;
        }
        let mut var = vec![0.0; d];
        for &i in idx {
            for (j, &x) in ds.rows[i].features.iter().enumerate() {
                let c = x - mean[j];
                var[j] += c * c;
            }
        }
        let scale = var
            .into_iter()
            .map(|v| {
                let sd = (v / n).sqrt();
                if sd > 1e-12 {
                    sd
                } else {
                    1.0
                }
            })
            .collect();
        Standardizer { mean, scale }
    }

    pub(crate) fn transform(&self, features: &[f64]) -> Vec<f64> {
        features
            .iter()
            .zip(self.mean.iter().zip(self.scale.iter()))
            .map(|(&x, (&m, &s))| (x - m) / s)
            .collect()
    }
}

#[cfg(test)]
pub(crate) mod test_data {
    use super::*;
    use rand::Rng;

    /// Dataset whose label is 1 iff feature 0 is positive; one row per
    /// group unless `rows_per_group` says otherwise.
    pub(crate) fn separable(n_groups: usize, rows_per_group: usize, d: usize) -> Dataset {
        let mut rows = Vec::new();
        for g in 0..n_groups {
            let sign = if g % 2 == 0 { 1.0 } else { -1.0 };
            for r in 0..rows_per_group {
                let mut features = vec![0.0; d];
                features[0] = sign * (1.0 + 0.1 * r as f64 + 0.05 * g as f64);
                for (j, f) in features.iter_mut().enumerate().skip(1) {
                    *f = ((g * 31 + r * 7 + j) % 13) as f64 * 0.1;
                }
                rows.push(DataRow {
                    features,
                    label: u8::from(sign > 0.0),
                    group: g as u64,
                });
            }
        }
        Dataset {
            feature_count: d,
            rows,
        }
    }

    /// Random features, random labels, one row per group.
    pub(crate) fn random_labels(n_groups: usize, d: usize, seed: u64) -> Dataset {
        let mut rng = crate::rng::substream(seed, "test-random-labels");
        let rows = (0..n_groups)
            .map(|g| DataRow {
                features: (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect(),
                label: u8::from(rng.gen::<bool>()),
                group: g as u64,
            })
            .collect();
        Dataset {
            feature_count: d,
            rows,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dataset_validation_catches_defects() {
        let good = test_data::separable(4, 1, 3);
        assert!(good.validate().is_ok());

        let mut one_label = good.clone();
        for row in one_label.rows.iter_mut() {
            row.label = 0;
        }
        assert!(one_label.validate().is_err());

        let mut nan = good.clone();
        nan.rows[0].features[1] = f64::NAN;
        assert!(nan.validate().is_err());
    }

    #[test]
    fn spec_params_serialize_as_plain_objects() {
        let spec = ClassifierSpec::Knn(KnnParams {
            k: 7,
            weighting: Weighting::InverseDistance,
        });
        let json = serde_json::to_string(&spec).unwrap();
        assert_eq!(json, r#"{"k":7,"weighting":"inverse_distance"}"#);

        let spec = ClassifierSpec::SvmLinear(SvmParams { c: 0.5, epochs: 9 });
        assert_eq!(
            serde_json::to_string(&spec).unwrap(),
            r#"{"c":0.5,"epochs":9}"#
        );
    }

    #[test]
    fn classifier_kind_parsing() {
        assert_eq!(
            "knn".parse::<ClassifierKind>().unwrap(),
            ClassifierKind::Knn
        );
        assert_eq!(
            "SVM".parse::<ClassifierKind>().unwrap(),
            ClassifierKind::SvmLinear
        );
        assert_eq!(
            "svm_linear".parse::<ClassifierKind>().unwrap(),
            ClassifierKind::SvmLinear
        );
        assert!("perceptron".parse::<ClassifierKind>().is_err());
    }

    #[test]
    fn raw_flattened_shape() {
        use crate::linalg::Matrix;
        use crate::windowing::InstanceWindow;
        let inst = InstanceWindow {
            instance_id: 42,
            x: Matrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0], vec![5.0, 6.0]]),
            label: 1,
            anchor_ts: 0,
        };
        let ds = Dataset::raw_flattened(&[&inst]);
        assert_eq!(ds.feature_count, 6);
        assert_eq!(ds.rows[0].features, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        assert_eq!(ds.rows[0].group, 42);
    }
}
