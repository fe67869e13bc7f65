//! Datasets and their construction: loaders, class configurations, synthetic
//! class-shift tasks, finite distributions and cross-validation folds.

mod finite;
mod folds;
mod io;
mod split;
mod synthetic;

use std::collections::BTreeMap;
use std::fmt;

use serde::de::{self, Deserializer, Visitor};
use serde::{Deserialize, Serialize, Serializer};

use crate::error::{Error, Result};

pub use finite::{Atom, FiniteDistribution};
pub use folds::{kfold_split, Fold};
pub use io::{
    load_csv, load_libsvm, load_unlabeled, read_libsvm, write_csv_features, write_libsvm,
    RawDataset,
};
pub use split::{split_class_configuration, split_with_theta, ClassConfiguration, Split};
pub use synthetic::{
    bayes_risk_monte_carlo, bayes_risk_oracle, sample_synthetic, GaussianComponent,
    GaussianMixture, KnownClass, SyntheticSpec, TestDensity,
};

pub(crate) use folds::stratified_folds;

/// Dense row-major feature matrix. Every row has the same dimension and
/// every entry is finite.
#[derive(Clone, Debug, PartialEq)]
pub struct Features {
    dim: usize,
    values: Vec<f64>,
}

impl Features {
    pub fn new(dim: usize, values: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidArgument("feature dimension must be >= 1".into()));
        }
        if values.len() % dim != 0 {
            return Err(Error::InvalidArgument(format!(
                "{} values do not form rows of dimension {dim}",
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("feature values".into()));
        }
        Ok(Features { dim, values })
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let first = rows
            .first()
            .ok_or_else(|| Error::Empty("no feature rows".into()))?;
        let dim = first.as_ref().len();
        let mut values = Vec::with_capacity(dim * rows.len());
        for row in rows {
            let row = row.as_ref();
            if row.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: row.len(),
                });
            }
            values.extend_from_slice(row);
        }
        Features::new(dim, values)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.values.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.values.chunks_exact(self.dim)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn select(&self, indices: &[usize]) -> Features {
        let mut values = Vec::with_capacity(indices.len() * self.dim);
        for &i in indices {
            values.extend_from_slice(self.row(i));
        }
        Features {
            dim: self.dim,
            values,
        }
    }

    /// Rows of `self` followed by rows of `other`.
    pub fn concat(&self, other: &Features) -> Result<Features> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: other.dim,
            });
        }
        let mut values = Vec::with_capacity(self.values.len() + other.values.len());
        values.extend_from_slice(&self.values);
        values.extend_from_slice(&other.values);
        Ok(Features {
            dim: self.dim,
            values,
        })
    }

    /// Zero-pads every row to `dim` columns (sparse files omit trailing zeros).
    pub fn padded(&self, dim: usize) -> Result<Features> {
        if dim < self.dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: self.dim,
            });
        }
        if dim == self.dim {
            return Ok(self.clone());
        }
        let mut values = Vec::with_capacity(self.len() * dim);
        for row in self.rows() {
            values.extend_from_slice(row);
            values.resize(values.len() + dim - self.dim, 0.0);
        }
        Ok(Features { dim, values })
    }
}

/// Class label over the augmented label space `{1..K, nc}`.
///
/// Known classes are 1-based. `New` orders after every known class, which is
/// what the argmax tie-break relies on.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Label {
    Known(usize),
    New,
}

impl Label {
    /// Column index in a score matrix with `num_known + 1` columns.
    pub fn index(self, num_known: usize) -> usize {
        match self {
            Label::Known(k) => k - 1,
            Label::New => num_known,
        }
    }

    pub fn from_index(index: usize, num_known: usize) -> Label {
        if index >= num_known {
            Label::New
        } else {
            Label::Known(index + 1)
        }
    }

    pub fn is_new(self) -> bool {
        matches!(self, Label::New)
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Label::Known(k) => write!(f, "{k}"),
            Label::New => f.write_str("nc"),
        }
    }
}

impl Serialize for Label {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Label::Known(k) => serializer.serialize_u64(*k as u64),
            Label::New => serializer.serialize_str("nc"),
        }
    }
}

impl<'de> Deserialize<'de> for Label {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        struct LabelVisitor;

        impl Visitor<'_> for LabelVisitor {
            type Value = Label;

            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("a positive class index or \"nc\"")
            }

            fn visit_u64<E: de::Error>(self, v: u64) -> std::result::Result<Label, E> {
                if v == 0 {
                    return Err(E::custom("known labels are 1-based"));
                }
                Ok(Label::Known(v as usize))
            }

            fn visit_i64<E: de::Error>(self, v: i64) -> std::result::Result<Label, E> {
                if v <= 0 {
                    return Err(E::custom("known labels are 1-based"));
                }
                Ok(Label::Known(v as usize))
            }

            fn visit_str<E: de::Error>(self, v: &str) -> std::result::Result<Label, E> {
                if v == "nc" {
                    Ok(Label::New)
                } else {
                    Err(E::custom(format!("unknown label `{v}`")))
                }
            }
        }

        deserializer.deserialize_any(LabelVisitor)
    }
}

/// Samples from the training distribution: labels are 1..K, never `nc`.
///
/// `label_table[k - 1]` is the original class id of internal class `k`.
#[derive(Clone, Debug, PartialEq)]
pub struct LabeledDataset {
    features: Features,
    labels: Vec<usize>,
    label_table: Vec<i64>,
}

impl LabeledDataset {
    pub fn new(features: Features, labels: Vec<usize>, label_table: Vec<i64>) -> Result<Self> {
        if features.len() != labels.len() {
            return Err(Error::InvalidArgument(format!(
                "{} feature rows but {} labels",
                features.len(),
                labels.len()
            )));
        }
        if label_table.is_empty() {
            return Err(Error::InvalidArgument("at least one known class is required".into()));
        }
        let k = label_table.len();
        if let Some(bad) = labels.iter().find(|&&y| y == 0 || y > k) {
            return Err(Error::InvalidArgument(format!(
                "label {bad} outside 1..={k}"
            )));
        }
        Ok(LabeledDataset {
            features,
            labels,
            label_table,
        })
    }

    /// Remaps arbitrary integer labels to 1..K in ascending order of the
    /// distinct originals.
    pub fn from_original_labels(features: Features, original: &[i64]) -> Result<Self> {
        let (labels, table) = remap_labels(original);
        LabeledDataset::new(features, labels, table)
    }

    pub fn features(&self) -> &Features {
        &self.features
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn label_table(&self) -> &[i64] {
        &self.label_table
    }

    pub fn num_known(&self) -> usize {
        self.label_table.len()
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.features.dim()
    }

    /// Original class id of each sample.
    pub fn original_labels(&self) -> Vec<i64> {
        self.labels.iter().map(|&y| self.label_table[y - 1]).collect()
    }

    pub fn select(&self, indices: &[usize]) -> LabeledDataset {
        LabeledDataset {
            features: self.features.select(indices),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            label_table: self.label_table.clone(),
        }
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.num_known()];
        for &y in &self.labels {
            counts[y - 1] += 1;
        }
        counts
    }
}

pub(crate) fn remap_labels(original: &[i64]) -> (Vec<usize>, Vec<i64>) {
    let mut table: Vec<i64> = original.to_vec();
    table.sort_unstable();
    table.dedup();
    let lookup: BTreeMap<i64, usize> = table.iter().enumerate().map(|(i, &l)| (l, i + 1)).collect();
    let labels = original.iter().map(|l| lookup[l]).collect();
    (labels, table)
}

/// Samples from the test marginal, without labels.
#[derive(Clone, Debug, PartialEq)]
pub struct UnlabeledDataset {
    features: Features,
}

impl UnlabeledDataset {
    pub fn new(features: Features) -> Result<Self> {
        if features.is_empty() {
            return Err(Error::Empty("unlabeled dataset".into()));
        }
        Ok(UnlabeledDataset { features })
    }

    pub fn features(&self) -> &Features {
        &self.features
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.features.dim()
    }

    pub fn select(&self, indices: &[usize]) -> UnlabeledDataset {
        UnlabeledDataset {
            features: self.features.select(indices),
        }
    }
}

/// Labeled samples from the test distribution; new-class samples carry
/// [`Label::New`].
#[derive(Clone, Debug, PartialEq)]
pub struct TestDataset {
    features: Features,
    labels: Vec<Label>,
    num_known: usize,
}

impl TestDataset {
    pub fn new(features: Features, labels: Vec<Label>, num_known: usize) -> Result<Self> {
        if features.len() != labels.len() {
            return Err(Error::InvalidArgument(format!(
                "{} feature rows but {} labels",
                features.len(),
                labels.len()
            )));
        }
        for y in &labels {
            if let Label::Known(k) = y {
                if *k == 0 || *k > num_known {
                    return Err(Error::InvalidArgument(format!(
                        "label {k} outside 1..={num_known}"
                    )));
                }
            }
        }
        Ok(TestDataset {
            features,
            labels,
            num_known,
        })
    }

    pub fn features(&self) -> &Features {
        &self.features
    }

    pub fn labels(&self) -> &[Label] {
        &self.labels
    }

    pub fn num_known(&self) -> usize {
        self.num_known
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn new_class_count(&self) -> usize {
        self.labels.iter().filter(|y| y.is_new()).count()
    }
}
