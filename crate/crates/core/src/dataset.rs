//! The subjects × features matrix, negative-class augmentation,
//! standardization and stratified fold assignment.

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::numfmt::g17;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DatasetError {
    #[error("dataset has no rows")]
    Empty,
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("non-finite value at row {row}, column {col}")]
    NonFinite { row: usize, col: usize },
    #[error("duplicate feature name `{0}`")]
    DuplicateFeature(String),
    #[error("dataset has no negative (HC) rows to augment")]
    NoNegatives,
    #[error("class {class} has {count} rows, fewer than the {k} folds requested")]
    ClassTooSmall { class: Label, count: usize, k: usize },
    #[error("fold count must be at least 2, got {0}")]
    BadFoldCount(usize),
    #[error("unknown feature `{name}`; available: {available}")]
    UnknownFeature { name: String, available: String },
}

/// Binary class label. `Hc` is the negative class and sorts first, which is
/// what the tie-break rules across the crate rely on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Label {
    Hc,
    Pd,
}

impl Label {
    pub fn is_positive(self) -> bool {
        self == Label::Pd
    }

    /// 1.0 for PD, 0.0 for HC.
    pub fn as_target(self) -> f64 {
        if self.is_positive() {
            1.0
        } else {
            0.0
        }
    }

    /// +1 for PD, -1 for HC.
    pub fn sign(self) -> f64 {
        if self.is_positive() {
            1.0
        } else {
            -1.0
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Label::Hc => "HC",
            Label::Pd => "PD",
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Label {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_uppercase().as_str() {
            "PD" => Ok(Label::Pd),
            "HC" => Ok(Label::Hc),
            other => Err(other.to_string()),
        }
    }
}

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self, DatasetError> {
        if data.len() != rows * cols {
            return Err(DatasetError::Shape(format!(
                "{} values for a {}x{} matrix",
                data.len(),
                rows,
                cols
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, DatasetError> {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for (i, r) in rows.iter().enumerate() {
            if r.len() != cols {
                return Err(DatasetError::Shape(format!(
                    "row {} has {} values, expected {}",
                    i,
                    r.len(),
                    cols
                )));
            }
            data.extend_from_slice(r);
        }
        Ok(Self { rows: rows.len(), cols, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = &[f64]> {
        (0..self.rows).map(move |i| self.row(i))
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self.get(i, j)).collect()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn select_rows(&self, indices: &[usize]) -> Matrix {
        let mut data = Vec::with_capacity(indices.len() * self.cols);
        for &i in indices {
            data.extend_from_slice(self.row(i));
        }
        Matrix { rows: indices.len(), cols: self.cols, data }
    }

    pub fn select_columns(&self, columns: &[usize]) -> Matrix {
        let mut data = Vec::with_capacity(self.rows * columns.len());
        for r in self.iter_rows() {
            data.extend(columns.iter().map(|&j| r[j]));
        }
        Matrix { rows: self.rows, cols: columns.len(), data }
    }

    pub fn push_row(&mut self, row: &[f64]) {
        assert_eq!(row.len(), self.cols, "row width");
        self.data.extend_from_slice(row);
        self.rows += 1;
    }
}

/// Subjects × features matrix with labels, feature names and subject ids.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    features: Matrix,
    labels: Vec<Label>,
    feature_names: Vec<String>,
    subject_ids: Vec<String>,
}

impl LabeledDataset {
    pub fn new(
        features: Matrix,
        labels: Vec<Label>,
        feature_names: Vec<String>,
        subject_ids: Vec<String>,
    ) -> Result<Self, DatasetError> {
        if features.rows() == 0 {
            return Err(DatasetError::Empty);
        }
        if labels.len() != features.rows() || subject_ids.len() != features.rows() {
            return Err(DatasetError::Shape(format!(
                "{} rows, {} labels, {} subject ids",
                features.rows(),
                labels.len(),
                subject_ids.len()
            )));
        }
        if feature_names.len() != features.cols() {
            return Err(DatasetError::Shape(format!(
                "{} columns, {} feature names",
                features.cols(),
                feature_names.len()
            )));
        }
        let mut seen = HashSet::new();
        for name in &feature_names {
            if !seen.insert(name.as_str()) {
                return Err(DatasetError::DuplicateFeature(name.clone()));
            }
        }
        for (i, row) in features.iter_rows().enumerate() {
            if let Some(j) = row.iter().position(|v| !v.is_finite()) {
                return Err(DatasetError::NonFinite { row: i, col: j });
            }
        }
        Ok(Self { features, labels, feature_names, subject_ids })
    }

    pub fn features(&self) -> &Matrix {
        &self.features
    }

    pub fn labels(&self) -> &[Label] {
        &self.labels
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn subject_ids(&self) -> &[String] {
        &self.subject_ids
    }

    pub fn n_rows(&self) -> usize {
        self.features.rows()
    }

    pub fn n_features(&self) -> usize {
        self.features.cols()
    }

    pub fn count(&self, label: Label) -> usize {
        self.labels.iter().filter(|&&l| l == label).count()
    }

    pub fn feature_index(&self, name: &str) -> Result<usize, DatasetError> {
        self.feature_names.iter().position(|n| n == name).ok_or_else(|| {
            DatasetError::UnknownFeature {
                name: name.to_string(),
                available: self.feature_names.join(", "),
            }
        })
    }

    /// Rows at `indices`, in that order. Indices may repeat.
    pub fn subset(&self, indices: &[usize]) -> LabeledDataset {
        LabeledDataset {
            features: self.features.select_rows(indices),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            feature_names: self.feature_names.clone(),
            subject_ids: indices.iter().map(|&i| self.subject_ids[i].clone()).collect(),
        }
    }

    /// Drops the named columns; names that are absent are ignored.
    pub fn without_features(&self, names: &[&str]) -> LabeledDataset {
        let keep: Vec<usize> = (0..self.n_features())
            .filter(|&j| !names.contains(&self.feature_names[j].as_str()))
            .collect();
        LabeledDataset {
            features: self.features.select_columns(&keep),
            labels: self.labels.clone(),
            feature_names: keep.iter().map(|&j| self.feature_names[j].clone()).collect(),
            subject_ids: self.subject_ids.clone(),
        }
    }

    /// Dataset interchange CSV: `subject_id,label,<features...>`, values with
    /// 17 significant digits.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("subject_id,label");
        for name in &self.feature_names {
            out.push(',');
            out.push_str(name);
        }
        out.push('\n');
        for i in 0..self.n_rows() {
            out.push_str(&self.subject_ids[i]);
            out.push(',');
            out.push_str(self.labels[i].as_str());
            for v in self.features.row(i) {
                out.push(',');
                out.push_str(&g17(*v));
            }
            out.push('\n');
        }
        out
    }
}

/// How augmented negatives are derived from an original negative row `x`
/// and the negative-class mean `mu`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AugmentRule {
    /// `x - mu`
    #[default]
    SubtractMean,
    /// `2 mu - x`, the reflection through the class mean.
    Reflect,
}

impl FromStr for AugmentRule {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "subtract" | "subtract-mean" => Ok(AugmentRule::SubtractMean),
            "reflect" => Ok(AugmentRule::Reflect),
            other => Err(format!("unknown augmentation rule `{other}`")),
        }
    }
}

pub const AUGMENTED_SUFFIX: &str = "+aug";

/// Appends one synthetic negative per original negative row, `x - mu` where
/// `mu` is the per-feature mean of the original negatives.
pub fn augment_negatives(ds: &LabeledDataset) -> Result<LabeledDataset, DatasetError> {
    augment_negatives_with(ds, AugmentRule::SubtractMean)
}

pub fn augment_negatives_with(
    ds: &LabeledDataset,
    rule: AugmentRule,
) -> Result<LabeledDataset, DatasetError> {
    let negatives: Vec<usize> = (0..ds.n_rows()).filter(|&i| ds.labels[i] == Label::Hc).collect();
    if negatives.is_empty() {
        return Err(DatasetError::NoNegatives);
    }
    let n = ds.n_features();
    let mut mean = vec![0.0; n];
    for &i in &negatives {
        for (m, v) in mean.iter_mut().zip(ds.features.row(i)) {
            *m += v;
        }
    }
    let count = negatives.len() as f64;
    for m in &mut mean {
        *m /= count;
    }

    let mut out = ds.clone();
    let mut new_row = vec![0.0; n];
    for &i in &negatives {
        let x = ds.features.row(i);
        for j in 0..n {
            new_row[j] = match rule {
                AugmentRule::SubtractMean => x[j] - mean[j],
                AugmentRule::Reflect => 2.0 * mean[j] - x[j],
            };
        }
        out.features.push_row(&new_row);
        out.labels.push(Label::Hc);
        out.subject_ids.push(format!("{}{}", ds.subject_ids[i], AUGMENTED_SUFFIX));
    }
    Ok(out)
}

/// Strips the augmentation suffix, giving the id of the source subject.
pub fn source_subject(id: &str) -> &str {
    id.strip_suffix(AUGMENTED_SUFFIX).unwrap_or(id)
}

/// Fold index per row for stratified K-fold cross-validation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FoldAssignment {
    fold_of: Vec<usize>,
    k: usize,
    seed: u64,
}

impl FoldAssignment {
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn fold_of(&self) -> &[usize] {
        &self.fold_of
    }

    pub fn test_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.fold_of.len()).filter(|&i| self.fold_of[i] == fold).collect()
    }

    pub fn train_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.fold_of.len()).filter(|&i| self.fold_of[i] != fold).collect()
    }

    /// `subject_id,fold` CSV.
    pub fn to_csv(&self, subject_ids: &[String]) -> String {
        let mut out = String::from("subject_id,fold\n");
        for (id, f) in subject_ids.iter().zip(&self.fold_of) {
            out.push_str(&format!("{id},{f}\n"));
        }
        out
    }
}

/// Stratified K-fold assignment over a label vector.
///
/// Each class's row indices are shuffled with a seeded generator, then dealt
/// round-robin over the folds. The dealing position carries over from one
/// class to the next (HC first), so total fold sizes also differ by at most
/// one.
pub fn stratified_kfold_labels(
    labels: &[Label],
    k: usize,
    seed: u64,
) -> Result<FoldAssignment, DatasetError> {
    if k < 2 {
        return Err(DatasetError::BadFoldCount(k));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut fold_of = vec![0usize; labels.len()];
    let mut classes = Vec::with_capacity(2);
    for class in [Label::Hc, Label::Pd] {
        let members: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        if members.len() < k {
            return Err(DatasetError::ClassTooSmall { class, count: members.len(), k });
        }
        classes.push(members);
    }
    let mut next = 0usize;
    for mut members in classes {
        members.shuffle(&mut rng);
        for i in members {
            fold_of[i] = next;
            next = (next + 1) % k;
        }
    }
    Ok(FoldAssignment { fold_of, k, seed })
}

pub fn stratified_kfold(
    ds: &LabeledDataset,
    k: usize,
    seed: u64,
) -> Result<FoldAssignment, DatasetError> {
    stratified_kfold_labels(ds.labels(), k, seed)
}

/// Per-feature mean and population standard deviation.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardizer {
    mean: Vec<f64>,
    stddev: Vec<f64>,
}

impl Standardizer {
    pub fn fit(x: &Matrix) -> Self {
        let s = x.rows() as f64;
        let n = x.cols();
        let mut mean = vec![0.0; n];
        for r in x.iter_rows() {
            for (m, v) in mean.iter_mut().zip(r) {
                *m += v;
            }
        }
        for m in &mut mean {
            *m /= s;
        }
        let mut var = vec![0.0; n];
        for r in x.iter_rows() {
            for j in 0..n {
                let d = r[j] - mean[j];
                var[j] += d * d;
            }
        }
        let stddev = var.into_iter().map(|v| (v / s).sqrt()).collect();
        Self { mean, stddev }
    }

    pub fn from_parts(mean: Vec<f64>, stddev: Vec<f64>) -> Self {
        Self { mean, stddev }
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn stddev(&self) -> &[f64] {
        &self.stddev
    }

    pub fn transform_row(&self, row: &[f64], out: &mut [f64]) {
        for j in 0..row.len() {
            out[j] = if self.stddev[j] > 0.0 {
                (row[j] - self.mean[j]) / self.stddev[j]
            } else {
                0.0
            };
        }
    }

    pub fn transform(&self, x: &Matrix) -> Matrix {
        let mut out = Matrix::zeros(x.rows(), x.cols());
        for i in 0..x.rows() {
            self.transform_row(x.row(i), out.row_mut(i));
        }
        out
    }

    /// Inverse map. Zero-variance columns come back as their mean.
    pub fn inverse_transform(&self, z: &Matrix) -> Matrix {
        let mut out = Matrix::zeros(z.rows(), z.cols());
        for i in 0..z.rows() {
            let (src, dst) = (z.row(i), out.row_mut(i));
            for j in 0..src.len() {
                dst[j] = src[j] * self.stddev[j] + self.mean[j];
            }
        }
        out
    }
}

pub fn fit_standardizer(train: &LabeledDataset) -> Standardizer {
    Standardizer::fit(train.features())
}

pub fn apply_standardizer(std: &Standardizer, ds: &LabeledDataset) -> LabeledDataset {
    LabeledDataset { features: std.transform(ds.features()), ..ds.clone() }
}
