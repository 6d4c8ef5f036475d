//! Grouped, stratified k-fold cross-validation.
//!
//! Folds partition instance groups, never rows, so the `l` transformed
//! rows of one instance always land in the same fold and cannot leak
//! between train and test. Instance predictions are majority votes over
//! the instance's row predictions, ties to class 0.

use std::collections::HashMap;

use rand::seq::SliceRandom;
use rayon::prelude::*;

use super::{fit_predict, ClassifierSpec, Dataset};
use crate::error::{Error, Result};
use crate::rng::{derive_seed, substream};

/// Pooled cross-validation results for one classifier spec.
#[derive(Debug, Clone, PartialEq)]
pub struct CvOutcome {
    /// Instance-level accuracy per fold.
    pub fold_accuracies: Vec<f64>,
    /// Pooled fraction of correctly predicted rows.
    pub row_accuracy: f64,
    /// Pooled fraction of correctly predicted instances (majority vote).
    pub instance_accuracy: f64,
    /// Instance-level confusion matrix `[[tn, fp], [fn, tp]]`.
    pub confusion: [[u64; 2]; 2],
    pub evaluated_instances: usize,
}

/// Assign groups to folds, stratified by the group's label.
///
/// Groups are shuffled within each class and dealt round-robin with a
/// cursor that continues across classes, so both the per-class and the
/// total group counts differ by at most one between folds.
pub fn assign_group_folds(ds: &Dataset, folds: usize, seed: u64) -> Result<Vec<Vec<u64>>> {
    if folds < 2 {
        return Err(Error::Domain("need at least 2 folds".into()));
    }
    let mut label_of: HashMap<u64, u8> = HashMap::new();
    for row in &ds.rows {
        match label_of.insert(row.group, row.label) {
            Some(prev) if prev != row.label => {
                return Err(Error::Domain(format!(
                    "group {} has mixed labels",
                    row.group
                )));
            }
            _ => {}
        }
    }
    if label_of.len() < folds {
        return Err(Error::Domain(format!(
            "only {} groups for {folds} folds",
            label_of.len()
        )));
    }
    let mut per_class: [Vec<u64>; 2] = [Vec::new(), Vec::new()];
    for (&group, &label) in &label_of {
        per_class[label as usize].push(group);
    }
    let mut rng = substream(seed, "cv-folds");
    let mut assignment: Vec<Vec<u64>> = vec![Vec::new(); folds];
    let mut cursor = 0usize;
    for ids in per_class.iter_mut() {
        ids.sort_unstable();
        ids.shuffle(&mut rng);
        for &group in ids.iter() {
            assignment[cursor % folds].push(group);
            cursor += 1;
        }
    }
    for fold in assignment.iter_mut() {
        fold.sort_unstable();
    }
    Ok(assignment)
}

/// Run grouped stratified k-fold cross-validation for one spec.
pub fn cross_validate(
    ds: &Dataset,
    spec: &ClassifierSpec,
    folds: usize,
    seed: u64,
) -> Result<CvOutcome> {
    ds.validate()?;
    spec.validate()?;
    let assignment = assign_group_folds(ds, folds, seed)?;

    struct FoldResult {
        rows_correct: u64,
        rows_total: u64,
        instance_correct: u64,
        confusion: [[u64; 2]; 2],
        instances: usize,
    }

    let results: Vec<Result<FoldResult>> = assignment
        .par_iter()
        .enumerate()
        .map(|(f, fold_groups)| {
            let in_fold = |g: u64| fold_groups.binary_search(&g).is_ok();
            let mut train_idx = Vec::new();
            let mut query_idx = Vec::new();
            for (i, row) in ds.rows.iter().enumerate() {
                if in_fold(row.group) {
                    query_idx.push(i);
                } else {
                    train_idx.push(i);
                }
            }
            let fold_seed = derive_seed(seed, &format!("cv-fold{f}"));
            let preds = fit_predict(ds, &train_idx, &query_idx, spec, fold_seed)?;

            let mut rows_correct = 0u64;
            // group -> (votes for 1, rows seen, true label)
            let mut votes: HashMap<u64, (usize, usize, u8)> = HashMap::new();
            for (&qi, &pred) in query_idx.iter().zip(preds.iter()) {
                let row = &ds.rows[qi];
                if pred == row.label {
                    rows_correct += 1;
                }
                let entry = votes.entry(row.group).or_insert((0, 0, row.label));
                entry.0 += usize::from(pred == 1);
                entry.1 += 1;
            }
            let mut confusion = [[0u64; 2]; 2];
            let mut instance_correct = 0u64;
            for (_, (ones, total, label)) in votes.iter() {
                // majority vote; ties predict class 0
                let pred = u8::from(*ones * 2 > *total);
                confusion[*label as usize][pred as usize] += 1;
                if pred == *label {
                    instance_correct += 1;
                }
            }
            Ok(FoldResult {
                rows_correct,
                rows_total: query_idx.len() as u64,
                instance_correct,
                confusion,
                instances: votes.len(),
            })
        })
        .collect();

    let mut fold_accuracies = Vec::with_capacity(folds);
    let mut rows_correct = 0u64;
    let mut rows_total = 0u64;
    let mut instance_correct = 0u64;
    let mut instances = 0usize;
    let mut confusion = [[0u64; 2]; 2];
    for r in results {
        let r = r?;
        fold_accuracies.push(r.instance_correct as f64 / r.instances.max(1) as f64);
        rows_correct += r.rows_correct;
        rows_total += r.rows_total;
        instance_correct += r.instance_correct;
        instances += r.instances;
        for a in 0..2 {
            for b in 0..2 {
                confusion[a][b] += r.confusion[a][b];
            }
        }
    }
    Ok(CvOutcome {
        fold_accuracies,
        row_accuracy: rows_correct as f64 / rows_total.max(1) as f64,
        instance_accuracy: instance_correct as f64 / instances.max(1) as f64,
        confusion,
        evaluated_instances: instances,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classifiers::{test_data, KnnParams, Weighting};

    #[test]
    fn folds_partition_groups_with_balanced_sizes() {
        let ds = test_data::separable(23, 3, 2);
        let folds = assign_group_folds(&ds, 5, 7).unwrap();
        let mut seen = std::collections::HashSet::new();
        for fold in &folds {
            for &g in fold {
                assert!(seen.insert(g), "group {g} in two folds");
            }
        }
        assert_eq!(seen.len(), 23);
        let sizes: Vec<usize> = folds.iter().map(|f| f.len()).collect();
        let max = *sizes.iter().max().unwrap();
        let min = *sizes.iter().min().unwrap();
        assert!(max - min <= 1, "fold sizes {sizes:?}");
        // stratification: per-class counts also within 1
        for class in 0..2u64 {
            let counts: Vec<usize> = folds
                .iter()
                .map(|f| f.iter().filter(|g| *g % 2 == class).count())
                .collect();
            let max = *counts.iter().max().unwrap();
            let min = *counts.iter().min().unwrap();
            assert!(max - min <= 1, "class {class} counts {counts:?}");
        }
    }

    #[test]
    fn too_few_groups_errors() {
        let ds = test_data::separable(4, 2, 2);
        assert!(assign_group_folds(&ds, 5, 1).is_err());
    }

    #[test]
    fn mixed_label_group_errors() {
        let mut ds = test_data::separable(6, 2, 2);
        ds.rows[1].label = 1 - ds.rows[1].label;
        assert!(matches!(
            assign_group_folds(&ds, 3, 1),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn separable_task_scores_perfectly() {
        let ds = test_data::separable(30, 4, 3);
        let spec = ClassifierSpec::Knn(KnnParams {
            k: 3,
            weighting: Weighting::Uniform,
        });
        let out = cross_validate(&ds, &spec, 5, 42).unwrap();
        assert_eq!(out.instance_accuracy, 1.0);
        assert_eq!(out.evaluated_instances, 30);
        assert_eq!(out.confusion[0][1] + out.confusion[1][0], 0);
        assert_eq!(out.fold_accuracies.len(), 5);
    }

    #[test]
    fn random_labels_stay_near_chance() {
        // 200 instances, labels independent of features: the 95% binomial
        // band around 0.5 is roughly [0.43, 0.57]; assert the looser
        // [0.35, 0.65]
        let ds = test_data::random_labels(200, 4, 17);
        let spec = ClassifierSpec::Knn(KnnParams {
            k: 1,
            weighting: Weighting::Uniform,
        });
        let out = cross_validate(&ds, &spec, 10, 5).unwrap();
        assert!(
            out.instance_accuracy > 0.35 && out.instance_accuracy < 0.65,
            "accuracy {}",
            out.instance_accuracy
        );
    }

    #[test]
    fn confusion_marginals_match_class_counts() {
        let ds = test_data::separable(20, 2, 3);
        let spec = ClassifierSpec::Knn(KnnParams {
            k: 5,
            weighting: Weighting::Uniform,
        });
        let out = cross_validate(&ds, &spec, 4, 9).unwrap();
        let class0 = out.confusion[0][0] + out.confusion[0][1];
        let class1 = out.confusion[1][0] + out.confusion[1][1];
        assert_eq!(class0, 10);
        assert_eq!(class1, 10);
        let total: u64 = out.confusion.iter().flatten().sum();
        assert_eq!(total as usize, out.evaluated_instances);
    }

    #[test]
    fn deterministic_across_runs() {
        let ds = test_data::random_labels(40, 3, 2);
        let spec = ClassifierSpec::default_for(crate::classifiers::ClassifierKind::Ensemble);
        let a = cross_validate(&ds, &spec, 5, 33).unwrap();
        let b = cross_validate(&ds, &spec, 5, 33).unwrap();
        assert_eq!(a, b);
    }
}
