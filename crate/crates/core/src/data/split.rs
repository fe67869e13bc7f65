//! Class configurations: which original classes are known during training and
//! which only appear in the unlabeled and test data.

use std::collections::BTreeSet;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Features, Label, LabeledDataset, TestDataset, UnlabeledDataset};
use crate::error::{Error, Result};

/// Partition of original class ids into known and new classes.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassConfiguration {
    known: BTreeSet<i64>,
    new: BTreeSet<i64>,
    #[serde(default)]
    seed: u64,
}

impl ClassConfiguration {
    pub fn new(known: BTreeSet<i64>, new: BTreeSet<i64>, seed: u64) -> Result<Self> {
        let config = ClassConfiguration { known, new, seed };
        config.validate()?;
        Ok(config)
    }

    /// Picks `floor(total / 2)` of the given classes as new, uniformly at
    /// random under `seed`; the rest are known.
    pub fn half_new(class_ids: &[i64], seed: u64) -> Result<Self> {
        let mut ids: Vec<i64> = class_ids.to_vec();
        ids.sort_unstable();
        ids.dedup();
        if ids.len() < 2 {
            return Err(Error::InvalidArgument(
                "need at least two classes to hold some out as new".into(),
            ));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut shuffled = ids.clone();
        shuffled.shuffle(&mut rng);
        let n_new = ids.len() / 2;
        let new: BTreeSet<i64> = shuffled[..n_new].iter().copied().collect();
        let known: BTreeSet<i64> = shuffled[n_new..].iter().copied().collect();
        ClassConfiguration::new(known, new, seed)
    }

    /// Parses `known = [...]`, `new = [...]`, optional `seed = n`.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let config: ClassConfiguration = toml::from_str(text)
            .map_err(|e| Error::InvalidArgument(format!("class configuration: {e}")))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    fn validate(&self) -> Result<()> {
        if self.known.is_empty() {
            return Err(Error::InvalidArgument("no known classes".into()));
        }
        if let Some(c) = self.known.intersection(&self.new).next() {
            return Err(Error::InvalidArgument(format!(
                "class {c} is both known and new"
            )));
        }
        Ok(())
    }

    pub fn known(&self) -> &BTreeSet<i64> {
        &self.known
    }

    pub fn new_classes(&self) -> &BTreeSet<i64> {
        &self.new
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }
}

/// The three datasets of one LAC experiment.
#[derive(Clone, Debug, PartialEq)]
pub struct Split {
    pub labeled: LabeledDataset,
    pub unlabeled: UnlabeledDataset,
    pub test: TestDataset,
}

/// Largest-remainder apportionment of `total` proportional to `weights`.
/// Ties in the fractional part go to the earlier entry.
pub(crate) fn apportion(total: usize, weights: &[usize]) -> Vec<usize> {
    let sum: usize = weights.iter().sum();
    if sum == 0 {
        return vec![0; weights.len()];
    }
    let mut out = Vec::with_capacity(weights.len());
    let mut rems = Vec::with_capacity(weights.len());
    for (i, &w) in weights.iter().enumerate() {
        let exact = total as u128 * w as u128;
        out.push((exact / sum as u128) as usize);
        rems.push((exact % sum as u128, i));
    }
    let assigned: usize = out.iter().sum();
    rems.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
    for &(_, i) in rems.iter().take(total - assigned) {
        out[i] += 1;
    }
    out
}

struct ClassPools {
    pools: Vec<Vec<usize>>,
    cursors: Vec<usize>,
}

impl ClassPools {
    fn new(full: &LabeledDataset, rng: &mut ChaCha8Rng) -> Self {
        let mut pools = vec![Vec::new(); full.num_known()];
        for (i, &y) in full.labels().iter().enumerate() {
            pools[y - 1].push(i);
        }
        for pool in &mut pools {
            pool.shuffle(rng);
        }
        let cursors = vec![0; pools.len()];
        ClassPools { pools, cursors }
    }

    fn size(&self, class: usize) -> usize {
        self.pools[class].len()
    }

    /// Takes `count` samples of `class`, continuing from where the previous
    /// draw stopped. Wraps around (reusing samples) only once the class is
    /// exhausted.
    fn take(&mut self, class: usize, count: usize, what: &str) -> Result<Vec<usize>> {
        let pool = &self.pools[class];
        if count > pool.len() {
            return Err(Error::InsufficientSamples(format!(
                "{what} needs {count} samples of class index {} but only {} exist",
                class + 1,
                pool.len()
            )));
        }
        let start = self.cursors[class];
        let out = (0..count).map(|i| pool[(start + i) % pool.len()]).collect();
        self.cursors[class] = start + count;
        Ok(out)
    }
}

fn class_indices(full: &LabeledDataset, ids: &BTreeSet<i64>) -> Result<Vec<usize>> {
    let table = full.label_table();
    ids.iter()
        .map(|id| {
            table
                .iter()
                .position(|t| t == id)
                .ok_or_else(|| Error::InvalidArgument(format!("class {id} not present in dataset")))
        })
        .collect()
}

fn draw_split(
    full: &LabeledDataset,
    config: &ClassConfiguration,
    n_labeled: usize,
    n_unlabeled: usize,
    n_test: usize,
    theta: Option<f64>,
    seed: u64,
) -> Result<Split> {
    if n_labeled == 0 || n_unlabeled == 0 {
        return Err(Error::InvalidArgument(
            "labeled and unlabeled sizes must be positive".into(),
        ));
    }
    let known = class_indices(full, config.known())?;
    let new = class_indices(full, config.new_classes())?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pools = ClassPools::new(full, &mut rng);

    let known_sizes: Vec<usize> = known.iter().map(|&c| pools.size(c)).collect();
    let new_sizes: Vec<usize> = new.iter().map(|&c| pools.size(c)).collect();
    let involved: Vec<usize> = known.iter().chain(&new).copied().collect();

    let mixture_allocation = |n: usize| -> Result<Vec<usize>> {
        match theta {
            None => {
                let sizes: Vec<usize> = known_sizes.iter().chain(&new_sizes).copied().collect();
                Ok(apportion(n, &sizes))
            }
            Some(theta) => {
                let n_known = (theta * n as f64).round() as usize;
                let n_new = n - n_known;
                if n_new > 0 && new.is_empty() {
                    return Err(Error::InvalidArgument(
                        "theta < 1 requires at least one new class".into(),
                    ));
                }
                let mut alloc = apportion(n_known, &known_sizes);
                alloc.extend(apportion(n_new, &new_sizes));
                Ok(alloc)
            }
        }
    };

    let labeled_alloc = apportion(n_labeled, &known_sizes);
    let unlabeled_alloc = mixture_allocation(n_unlabeled)?;
    let test_alloc = mixture_allocation(n_test)?;

    // internal label of each known class in the output: rank among known ids
    let mut rank = vec![None; full.num_known()];
    for (r, &c) in known.iter().enumerate() {
        rank[c] = Some(r + 1);
    }

    let mut labeled_idx = Vec::with_capacity(n_labeled);
    for (&c, &count) in known.iter().zip(&labeled_alloc) {
        labeled_idx.extend(pools.take(c, count, "labeled set")?);
    }
    let mut unlabeled_idx = Vec::with_capacity(n_unlabeled);
    for (&c, &count) in involved.iter().zip(&unlabeled_alloc) {
        unlabeled_idx.extend(pools.take(c, count, "unlabeled set")?);
    }
    let mut test_idx = Vec::with_capacity(n_test);
    for (&c, &count) in involved.iter().zip(&test_alloc) {
        test_idx.extend(pools.take(c, count, "test set")?);
    }
    labeled_idx.shuffle(&mut rng);
    unlabeled_idx.shuffle(&mut rng);
    test_idx.shuffle(&mut rng);

    let labels = full.labels();
    let labeled_labels = labeled_idx
        .iter()
        .map(|&i| rank[labels[i] - 1].expect("labeled samples come from known classes"))
        .collect();
    let known_table: Vec<i64> = known.iter().map(|&c| full.label_table()[c]).collect();
    let labeled = LabeledDataset::new(
        full.features().select(&labeled_idx),
        labeled_labels,
        known_table,
    )?;

    let unlabeled = UnlabeledDataset::new(full.features().select(&unlabeled_idx))?;

    let test_labels = test_idx
        .iter()
        .map(|&i| match rank[labels[i] - 1] {
            Some(k) => Label::Known(k),
            None => Label::New,
        })
        .collect();
    let test_features = if test_idx.is_empty() {
        Features::new(full.dim(), Vec::new())?
    } else {
        full.features().select(&test_idx)
    };
    let test = TestDataset::new(test_features, test_labels, known.len())?;

    Ok(Split {
        labeled,
        unlabeled,
        test,
    })
}

/// Draws labeled data from the known classes only, and unlabeled and test data
/// from all configured classes in proportion to their sizes in `full`.
/// New-class test samples are relabeled [`Label::New`]. Index sets are
/// disjoint as long as every class has enough samples for all three draws.
pub fn split_class_configuration(
    full: &LabeledDataset,
    config: &ClassConfiguration,
    n_labeled: usize,
    n_unlabeled: usize,
    n_test: usize,
    seed: u64,
) -> Result<Split> {
    draw_split(full, config, n_labeled, n_unlabeled, n_test, None, seed)
}

/// As [`split_class_configuration`], but unlabeled and test sets contain a
/// fraction `theta` of known-class samples (the rest from new classes).
pub fn split_with_theta(
    full: &LabeledDataset,
    config: &ClassConfiguration,
    n_labeled: usize,
    n_unlabeled: usize,
    n_test: usize,
    theta: f64,
    seed: u64,
) -> Result<Split> {
    if !(theta > 0.0 && theta <= 1.0) {
        return Err(Error::InvalidArgument(format!("theta {theta} outside (0, 1]")));
    }
    draw_split(full, config, n_labeled, n_unlabeled, n_test, Some(theta), seed)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn six_class_dataset(per_class: usize) -> LabeledDataset {
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for c in 0..6i64 {
            for i in 0..per_class {
                rows.push(vec![c as f64, i as f64]);
                labels.push(10 + c);
            }
        }
        LabeledDataset::from_original_labels(Features::from_rows(&rows).unwrap(), &labels).unwrap()
    }

    #[test]
    fn apportion_is_exact_and_proportional() {
        assert_eq!(apportion(10, &[1, 1, 1]), vec![4, 3, 3]);
        assert_eq!(apportion(7, &[0, 5, 5]), vec![0, 4, 3]);
        assert_eq!(apportion(100, &[30, 70]), vec![30, 70]);
        assert_eq!(apportion(3, &[0, 0]), vec![0, 0]);
    }

    #[test]
    fn half_new_on_six_classes() {
        let cfg = ClassConfiguration::half_new(&[10, 11, 12, 13, 14, 15], 3).unwrap();
        assert_eq!(cfg.known().len(), 3);
        assert_eq!(cfg.new_classes().len(), 3);
        assert!(cfg.known().is_disjoint(cfg.new_classes()));
    }

    #[test]
    fn overlapping_configuration_rejected() {
        let known = [1, 2].into_iter().collect();
        let new = [2, 3].into_iter().collect();
        assert!(ClassConfiguration::new(known, new, 0).is_err());
    }

    #[test]
    fn split_sizes_and_no_leakage() {
        let full = six_class_dataset(400);
        let cfg = ClassConfiguration::half_new(full.label_table(), 1).unwrap();
        let split = split_class_configuration(&full, &cfg, 500, 1000, 1000, 9).unwrap();
        assert_eq!(split.labeled.len(), 500);
        assert_eq!(split.unlabeled.len(), 1000);
        assert_eq!(split.test.len(), 1000);
        assert_eq!(split.labeled.num_known(), 3);
        for orig in split.labeled.original_labels() {
            assert!(cfg.known().contains(&orig));
        }
        // six equal classes: largest remainder gives 167,167,167 | 167,166,166
        assert_eq!(split.test.new_class_count(), 499);
    }

    #[test]
    fn split_index_sets_are_disjoint_when_possible() {
        let full = six_class_dataset(200);
        let cfg = ClassConfiguration::half_new(full.label_table(), 2).unwrap();
        let split = split_class_configuration(&full, &cfg, 150, 300, 300, 4).unwrap();
        // rows are unique in `full`, so compare by value
        let key = |r: &[f64]| (r[0] as i64, r[1] as i64);
        let mut seen = std::collections::HashSet::new();
        for r in split.labeled.features().rows() {
            assert!(seen.insert(key(r)));
        }
        for r in split.unlabeled.features().rows() {
            assert!(seen.insert(key(r)));
        }
        for r in split.test.features().rows() {
            assert!(seen.insert(key(r)));
        }
    }

    #[test]
    fn empty_new_set_gives_no_new_test_labels() {
        let full = six_class_dataset(50);
        let known = full.label_table().iter().copied().collect();
        let cfg = ClassConfiguration::new(known, BTreeSet::new(), 0).unwrap();
        let split = split_class_configuration(&full, &cfg, 60, 60, 60, 0).unwrap();
        assert_eq!(split.test.new_class_count(), 0);
    }

    #[test]
    fn insufficient_samples_reported() {
        let full = six_class_dataset(10);
        let cfg = ClassConfiguration::half_new(full.label_table(), 0).unwrap();
        assert!(matches!(
            split_class_configuration(&full, &cfg, 100, 10, 10, 0),
            Err(Error::InsufficientSamples(_))
        ));
    }

    #[test]
    fn theta_controls_known_fraction() {
        let full = six_class_dataset(300);
        let cfg = ClassConfiguration::half_new(full.label_table(), 5).unwrap();
        let split = split_with_theta(&full, &cfg, 100, 200, 500, 0.8, 1).unwrap();
        assert_eq!(split.test.new_class_count(), 100);
        let split = split_with_theta(&full, &cfg, 100, 200, 500, 1.0, 1).unwrap();
        assert_eq!(split.test.new_class_count(), 0);
    }

    #[test]
    fn toml_configuration_parses() {
        let cfg = ClassConfiguration::from_toml_str("known = [1, 2]\nnew = [3]\nseed = 4\n").unwrap();
        assert_eq!(cfg.seed(), 4);
        assert!(ClassConfiguration::from_toml_str("known = [1]\nnew = [1]\n").is_err());
    }
}
