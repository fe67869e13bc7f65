//! K-fold partitions: stratified by class for labeled data, plain random for
//! unlabeled data.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{LabeledDataset, UnlabeledDataset};
use crate::error::{Error, Result};

/// One cross-validation fold. Index vectors refer to the input datasets.
#[derive(Clone, Debug)]
pub struct Fold {
    pub train_labeled: LabeledDataset,
    pub train_unlabeled: UnlabeledDataset,
    pub val_labeled: LabeledDataset,
    pub val_unlabeled: UnlabeledDataset,
    pub val_labeled_indices: Vec<usize>,
    pub val_unlabeled_indices: Vec<usize>,
}

/// Fold id of each labeled sample. Within each class (ascending), shuffled
/// samples are dealt round-robin, continuing where the previous class left
/// off, so per-class fold counts differ by at most one and fold sizes are
/// balanced overall.
pub(crate) fn stratified_folds(
    labels: &[usize],
    num_classes: usize,
    k: usize,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<usize>> {
    let mut by_class = vec![Vec::new(); num_classes];
    for (i, &y) in labels.iter().enumerate() {
        by_class[y - 1].push(i);
    }
    let mut assignment = vec![0; labels.len()];
    let mut offset = 0;
    for (c, members) in by_class.iter_mut().enumerate() {
        if members.is_empty() {
            continue;
        }
        if members.len() < k {
            return Err(Error::InsufficientSamples(format!(
                "class {} has {} labeled samples, fewer than {k} folds",
                c + 1,
                members.len()
            )));
        }
        members.shuffle(rng);
        for (j, &i) in members.iter().enumerate() {
            assignment[i] = (offset + j) % k;
        }
        offset = (offset + members.len()) % k;
    }
    Ok(assignment)
}

pub(crate) fn random_folds(n: usize, k: usize, rng: &mut ChaCha8Rng) -> Result<Vec<usize>> {
    if n < k {
        return Err(Error::InsufficientSamples(format!(
            "{n} unlabeled samples, fewer than {k} folds"
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let mut assignment = vec![0; n];
    for (j, &i) in order.iter().enumerate() {
        assignment[i] = j % k;
    }
    Ok(assignment)
}

fn members(assignment: &[usize], fold: usize) -> (Vec<usize>, Vec<usize>) {
    let (mut val, mut train) = (Vec::new(), Vec::new());
    for (i, &f) in assignment.iter().enumerate() {
        if f == fold {
            val.push(i);
        } else {
            train.push(i);
        }
    }
    (train, val)
}

/// Splits both datasets into `k` folds. Validation folds partition each
/// dataset; the result is deterministic given `seed`.
pub fn kfold_split(
    labeled: &LabeledDataset,
    unlabeled: &UnlabeledDataset,
    k: usize,
    seed: u64,
) -> Result<Vec<Fold>> {
    if k < 2 {
        return Err(Error::InvalidArgument("k must be >= 2".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let lab = stratified_folds(labeled.labels(), labeled.num_known(), k, &mut rng)?;
    let unl = random_folds(unlabeled.len(), k, &mut rng)?;
    (0..k)
        .map(|f| {
            let (train_l, val_l) = members(&lab, f);
            let (train_u, val_u) = members(&unl, f);
            if train_l.is_empty() || val_l.is_empty() {
                return Err(Error::InsufficientSamples(format!(
                    "fold {f} has an empty labeled part"
                )));
            }
            Ok(Fold {
                train_labeled: labeled.select(&train_l),
                train_unlabeled: unlabeled.select(&train_u),
                val_labeled: labeled.select(&val_l),
                val_unlabeled: unlabeled.select(&val_u),
                val_labeled_indices: val_l,
                val_unlabeled_indices: val_u,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Features;

    fn datasets(n_l: usize, n_u: usize, classes: usize) -> (LabeledDataset, UnlabeledDataset) {
        let rows: Vec<Vec<f64>> = (0..n_l).map(|i| vec![i as f64]).collect();
        let labels: Vec<usize> = (0..n_l).map(|i| i % classes + 1).collect();
        let table = (1..=classes as i64).collect();
        let l = LabeledDataset::new(Features::from_rows(&rows).unwrap(), labels, table).unwrap();
        let rows: Vec<Vec<f64>> = (0..n_u).map(|i| vec![i as f64]).collect();
        let u = UnlabeledDataset::new(Features::from_rows(&rows).unwrap()).unwrap();
        (l, u)
    }

    #[test]
    fn fold_sizes_match_arithmetic() {
        let (l, u) = datasets(500, 1000, 3);
        let folds = kfold_split(&l, &u, 5, 1).unwrap();
        assert_eq!(folds.len(), 5);
        for f in &folds {
            assert_eq!(f.val_labeled.len(), 100);
            assert_eq!(f.val_unlabeled.len(), 200);
            assert_eq!(f.train_labeled.len(), 400);
            assert_eq!(f.train_unlabeled.len(), 800);
        }
    }

    #[test]
    fn validation_folds_partition_the_data() {
        let (l, u) = datasets(53, 71, 4);
        let folds = kfold_split(&l, &u, 5, 7).unwrap();
        let mut lab: Vec<usize> = folds.iter().flat_map(|f| f.val_labeled_indices.clone()).collect();
        let mut unl: Vec<usize> = folds.iter().flat_map(|f| f.val_unlabeled_indices.clone()).collect();
        lab.sort_unstable();
        unl.sort_unstable();
        assert_eq!(lab, (0..53).collect::<Vec<_>>());
        assert_eq!(unl, (0..71).collect::<Vec<_>>());
    }

    #[test]
    fn stratification_within_one_sample() {
        let rows: Vec<Vec<f64>> = (0..97).map(|i| vec![i as f64]).collect();
        // skewed classes: 60 / 25 / 12
        let labels: Vec<usize> = (0..97).map(|i| if i < 60 { 1 } else if i < 85 { 2 } else { 3 }).collect();
        let l = LabeledDataset::new(Features::from_rows(&rows).unwrap(), labels, vec![1, 2, 3]).unwrap();
        let u = UnlabeledDataset::new(Features::from_rows(&rows).unwrap()).unwrap();
        let k = 5;
        let folds = kfold_split(&l, &u, k, 3).unwrap();
        let global = l.class_counts();
        for f in &folds {
            let counts = f.val_labeled.class_counts();
            for (c, &n) in counts.iter().enumerate() {
                let expected = global[c] as f64 / k as f64;
                assert!((n as f64 - expected).abs() <= 1.0, "class {c}: {n} vs {expected}");
            }
        }
    }

    #[test]
    fn small_class_rejected() {
        let (l, u) = datasets(8, 50, 4);
        assert!(matches!(kfold_split(&l, &u, 5, 0), Err(Error::InsufficientSamples(_))));
        assert!(kfold_split(&l, &u, 1, 0).is_err());
    }

    #[test]
    fn deterministic_given_seed() {
        let (l, u) = datasets(40, 40, 2);
        let a = kfold_split(&l, &u, 4, 9).unwrap();
        let b = kfold_split(&l, &u, 4, 9).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.val_labeled_indices, y.val_labeled_indices);
            assert_eq!(x.val_unlabeled_indices, y.val_unlabeled_indices);
        }
    }
}
