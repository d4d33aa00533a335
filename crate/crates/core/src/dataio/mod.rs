//! Tabular input: CSV loading, imputation and one-hot encoding, stratified
//! splits and cross-validation folds.

mod preprocess;
mod split;
mod table;

pub use preprocess::{preprocess, FeatureColumn, Preprocessor};
pub use split::{kfold_indices, stratified_split, undersized_classes, Fold, Split, SplitSpec};
pub use table::{load_table, parse_table, ColumnKind, LoadOptions, RawColumn, RawTable};

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::linalg::Matrix;
use crate::scalar::Real;

/// Numeric design matrix with integer class labels in `0..n_classes`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct Dataset<F: Real> {
    pub x: Matrix<F>,
    pub y: Vec<usize>,
    pub n_classes: usize,
    pub feature_names: Vec<String>,
}

impl<F: Real> Dataset<F> {
    /// Validates the full dataset invariants (finite cells, labels in range,
    /// at least two classes and as many rows as classes).
    pub fn new(x: Matrix<F>, y: Vec<usize>, n_classes: usize, feature_names: Vec<String>) -> Result<Self> {
        let d = Self::unchecked(x, y, n_classes, feature_names)?;
        if n_classes < 2 {
            return Err(Error::SingleClass(n_classes));
        }
        if d.len() < n_classes {
            return Err(Error::InsufficientData(format!(
                "{} rows for {} classes",
                d.len(),
                n_classes
            )));
        }
        Ok(d)
    }

    /// Like [`Dataset::new`] but allows subsets that miss some classes.
    pub fn unchecked(x: Matrix<F>, y: Vec<usize>, n_classes: usize, feature_names: Vec<String>) -> Result<Self> {
        if x.rows() != y.len() {
            return Err(Error::LengthMismatch(x.rows(), y.len()));
        }
        if feature_names.len() != x.cols() {
            return Err(Error::DimensionMismatch {
                expected: x.cols(),
                got: feature_names.len(),
            });
        }
        if let Some(&bad) = y.iter().find(|&&c| c >= n_classes) {
            return Err(invalid(format!("label {bad} outside 0..{n_classes}")));
        }
        if !x.is_finite() {
            return Err(invalid("feature matrix has non-finite cells"));
        }
        Ok(Self {
            x,
            y,
            n_classes,
            feature_names,
        })
    }

    /// Dataset with generated feature names `x0, x1, ...`.
    pub fn from_matrix(x: Matrix<F>, y: Vec<usize>, n_classes: usize) -> Result<Self> {
        let names = (0..x.cols()).map(|j| format!("x{j}")).collect();
        Self::new(x, y, n_classes, names)
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.x.cols()
    }

    pub fn subset(&self, idx: &[usize]) -> Self {
        Self {
            x: self.x.select_rows(idx),
            y: idx.iter().map(|&i| self.y[i]).collect(),
            n_classes: self.n_classes,
            feature_names: self.feature_names.clone(),
        }
    }

    /// Same labels, different features.
    pub fn with_features(&self, x: Matrix<F>, feature_names: Vec<String>) -> Result<Self> {
        Self::unchecked(x, self.y.clone(), self.n_classes, feature_names)
    }

    pub fn class_counts(&self) -> Vec<usize> {
        class_counts(&self.y, self.n_classes)
    }
}

pub fn class_counts(labels: &[usize], n_classes: usize) -> Vec<usize> {
    let mut counts = vec![0; n_classes];
    for &c in labels {
        counts[c] += 1;
    }
    counts
}
