//! Seeded random search over the declared hyperparameter ranges.
//!
//! Every draw is evaluated with the same fold partition (both use the
//! caller's seed), and the winner is the highest mean instance-level
//! accuracy with ties going to the earlier draw.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{
    cross_validate, ClassifierKind, ClassifierSpec, CvOutcome, Dataset, EnsembleParams, KnnParams,
    SvmParams, TreeParams, Weighting,
};
use crate::error::{Error, Result};
use crate::rng::substream;

/// Winning spec and its cross-validation outcome.
#[derive(Debug, Clone)]
pub struct TuneOutcome {
    pub spec: ClassifierSpec,
    pub outcome: CvOutcome,
    /// Number of specs evaluated.
    pub draws: usize,
}

/// Sample one spec from the declared search ranges.
fn sample_spec(kind: ClassifierKind, rng: &mut ChaCha8Rng) -> ClassifierSpec {
    match kind {
        ClassifierKind::Knn => ClassifierSpec::Knn(KnnParams {
            k: rng.gen_range(1..=50),
            weighting: if rng.gen::<bool>() {
                Weighting::Uniform
            } else {
                Weighting::InverseDistance
            },
        }),
        ClassifierKind::Tree => ClassifierSpec::Tree(TreeParams {
            max_depth: rng.gen_range(1..=30),
            min_leaf: rng.gen_range(1..=50),
        }),
        ClassifierKind::SvmLinear => ClassifierSpec::SvmLinear(SvmParams {
            c: 10f64.powf(rng.gen_range(-3.0..=3.0)),
            epochs: rng.gen_range(5..=50),
        }),
        ClassifierKind::Ensemble => ClassifierSpec::Ensemble(EnsembleParams {
            n_trees: rng.gen_range(10..=200),
            sample_fraction: rng.gen_range(0.3..=1.0),
            feature_fraction: rng.gen_range(0.3..=1.0),
            max_depth: rng.gen_range(1..=30),
            min_leaf: rng.gen_range(1..=50),
        }),
    }
}

/// Random-search `budget` specs of the given kind and return the best.
pub fn tune(
    ds: &Dataset,
    kind: ClassifierKind,
    budget: usize,
    folds: usize,
    seed: u64,
) -> Result<TuneOutcome> {
    if budget < 1 {
        return Err(Error::Domain("search budget must be at least 1".into()));
    }
    let mut rng = substream(seed, &format!("tune-{}", kind.name()));
    let specs: Vec<ClassifierSpec> = (0..budget).map(|_| sample_spec(kind, &mut rng)).collect();

    let outcomes: Vec<Result<CvOutcome>> = specs
        .par_iter()
        .map(|spec| cross_validate(ds, spec, folds, seed))
        .collect();

    let mut best: Option<(usize, CvOutcome)> = None;
    for (i, outcome) in outcomes.into_iter().enumerate() {
        let outcome = outcome?;
        let better = match &best {
            None => true,
            Some((_, current)) => outcome.instance_accuracy > current.instance_accuracy,
        };
        if better {
            best = Some((i, outcome));
        }
    }
    let (winner, outcome) = best.expect("budget >= 1 guarantees a winner");
    Ok(TuneOutcome {
        spec: specs[winner],
        outcome,
        draws: budget,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classifiers::test_data;

    #[test]
    fn budget_one_evaluates_a_single_draw() {
        let ds = test_data::separable(20, 2, 3);
        let out = tune(&ds, ClassifierKind::Knn, 1, 4, 5).unwrap();
        assert_eq!(out.draws, 1);
        // the single draw must equal the first sample from the stream
        let mut rng = substream(5, "tune-knn");
        let expected = sample_spec(ClassifierKind::Knn, &mut rng);
        assert_eq!(out.spec, expected);
    }

    #[test]
    fn same_seed_same_winner() {
        let ds = test_data::random_labels(30, 3, 11);
        let a = tune(&ds, ClassifierKind::Tree, 8, 3, 21).unwrap();
        let b = tune(&ds, ClassifierKind::Tree, 8, 3, 21).unwrap();
        assert_eq!(a.spec, b.spec);
        assert_eq!(a.outcome, b.outcome);
    }

    #[test]
    fn winner_beats_or_matches_default_spec() {
        let ds = test_data::separable(24, 2, 3);
        for kind in ClassifierKind::ALL {
            let tuned = tune(&ds, kind, 6, 4, 9).unwrap();
            let default_outcome =
                cross_validate(&ds, &ClassifierSpec::default_for(kind), 4, 9).unwrap();
            assert!(
                tuned.outcome.instance_accuracy >= default_outcome.instance_accuracy,
                "{kind}: tuned {} < default {}",
                tuned.outcome.instance_accuracy,
                default_outcome.instance_accuracy
            );
        }
    }

    #[test]
    fn rejects_zero_budget() {
        let ds = test_data::separable(10, 1, 2);
        assert!(tune(&ds, ClassifierKind::Knn, 0, 3, 1).is_err());
    }
}
