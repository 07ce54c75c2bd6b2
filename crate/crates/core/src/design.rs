//! Grouped design matrix: a standardized covariate matrix together with a
//! validated partition of its columns into groups.

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use nalgebra::{DMatrix, DVector};

/// Design matrix with columns partitioned into `r` groups.
///
/// Columns are standardized at construction (population mean, sample standard
/// deviation); the moments are retained so held-out covariates can be put on
/// the same scale. Immutable after construction and safe to share across
/// threads.
#[derive(Debug, Clone)]
pub struct GroupedDesign<T: Scalar> {
    x: DMatrix<T>,
    groups: Vec<Vec<usize>>,
    col_means: DVector<T>,
    col_sds: DVector<T>,
}

impl<T: Scalar> GroupedDesign<T> {
    /// Number of observations.
    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    /// Number of columns.
    pub fn p(&self) -> usize {
        self.x.ncols()
    }

    /// Number of groups.
    pub fn r(&self) -> usize {
        self.groups.len()
    }

    /// Standardized design matrix.
    pub fn x(&self) -> &DMatrix<T> {
        &self.x
    }

    /// Column indices (0-based) of group `j`.
    pub fn group(&self, j: usize) -> &[usize] {
        &self.groups[j]
    }

    pub fn groups(&self) -> &[Vec<usize>] {
        &self.groups
    }

    /// Columns of group `j` gathered into a dense n×|G_j| matrix.
    pub fn group_columns(&self, j: usize) -> DMatrix<T> {
        let idx = &self.groups[j];
        DMatrix::from_fn(self.n(), idx.len(), |i, c| self.x[(i, idx[c])])
    }

    /// Standardize new rows with this design's training moments.
    pub fn standardize_with_train_moments(&self, raw: &DMatrix<T>) -> Result<DMatrix<T>> {
        if raw.ncols() != self.p() {
            return Err(Error::DimensionMismatch(format!(
                "expected {} columns, got {}",
                self.p(),
                raw.ncols()
            )));
        }
        let mut out = raw.clone();
        for j in 0..self.p() {
            let m = self.col_means[j];
            let s = self.col_sds[j];
            for i in 0..raw.nrows() {
                out[(i, j)] = (raw[(i, j)] - m) / s;
            }
        }
        Ok(out)
    }

    /// Total number of columns covered by the groups in `model`.
    pub fn model_size(&self, model: &[usize]) -> usize {
        model.iter().map(|&j| self.groups[j].len()).sum()
    }
}

/// Validate a column partition and standardize the matrix into a
/// [`GroupedDesign`].
///
/// Groups must be disjoint, nonempty, and cover every column exactly once.
/// Standardization uses the population mean and the sample (n−1) standard
/// deviation per column; a constant column is rejected.
pub fn validate_design<T: Scalar>(
    x: DMatrix<T>,
    groups: Vec<Vec<usize>>,
) -> Result<GroupedDesign<T>> {
    let (n, p) = x.shape();
    if n < 2 {
        return Err(Error::InvalidParameter(format!(
            "need at least 2 rows to standardize, got {n}"
        )));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter("design matrix must be finite".into()));
    }
    if groups.is_empty() {
        return Err(Error::GroupStructure("no groups given".into()));
    }
    let mut seen = vec![false; p];
    for (j, g) in groups.iter().enumerate() {
        if g.is_empty() {
            return Err(Error::GroupStructure(format!("group {j} is empty")));
        }
        for &col in g {
            if col >= p {
                return Err(Error::GroupStructure(format!(
                    "group {j} references column {col} beyond p = {p}"
                )));
            }
            if seen[col] {
                return Err(Error::GroupStructure(format!(
                    "column {col} appears in more than one group"
                )));
            }
            seen[col] = true;
        }
    }
    if let Some(col) = seen.iter().position(|&s| !s) {
        return Err(Error::GroupStructure(format!(
            "column {col} not covered by any group"
        )));
    }

    let mut x = x;
    let mut col_means = DVector::zeros(p);
    let mut col_sds = DVector::zeros(p);
    let n_t = T::of(n as f64);
    for j in 0..p {
        let mut col = x.column_mut(j);
        let mean = col.iter().fold(T::zero(), |acc, v| acc + *v) / n_t;
        let ss = col
            .iter()
            .fold(T::zero(), |acc, v| acc + (*v - mean) * (*v - mean));
        let var = ss / T::of((n - 1) as f64);
        if !(var > T::of(1e-20)) {
            return Err(Error::DegenerateColumn { index: j });
        }
        let sd = var.sqrt();
        for v in col.iter_mut() {
            *v = (*v - mean) / sd;
        }
        col_means[j] = mean;
        col_sds[j] = sd;
    }

    Ok(GroupedDesign {
        x,
        groups,
        col_means,
        col_sds,
    })
}
