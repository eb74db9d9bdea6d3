use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{gram, min_eigenvalue, min_eigenvalue_at_least};

const ZERO_COLUMN_NORM: f64 = 1e-12;
const SINGULAR_EIGENVALUE: f64 = 1e-10;

/// A regression design with unit-norm columns and its cached Gram matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix {
    values: DMatrix<f64>,
    gram: DMatrix<f64>,
    column_norms: Vec<f64>,
}

impl DesignMatrix {
    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    /// `Σ = XᵀX`.
    pub fn gram(&self) -> &DMatrix<f64> {
        &self.gram
    }

    /// Column norms of the raw matrix before normalization.
    pub fn column_norms(&self) -> &[f64] {
        &self.column_norms
    }

    pub fn nrows(&self) -> usize {
        self.values.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.values.ncols()
    }

    /// `Xᵀy`.
    pub fn xty(&self, y: &DVector<f64>) -> DVector<f64> {
        self.values.tr_mul(y)
    }

    /// Same columns with `extra` zero rows appended. The Gram matrix is carried
    /// over unchanged since zero rows do not contribute to it.
    pub(crate) fn with_zero_rows(&self, extra: usize) -> DesignMatrix {
        let (n, p) = self.values.shape();
        let mut values = DMatrix::zeros(n + extra, p);
        values.rows_mut(0, n).copy_from(&self.values);
        DesignMatrix {
            values,
            gram: self.gram.clone(),
            column_norms: self.column_norms.clone(),
        }
    }
}

/// Scales each column of `raw` to unit Euclidean norm and caches `Σ = XᵀX`.
///
/// Refuses designs whose Gram matrix is numerically singular.
pub fn normalize_design(raw: &DMatrix<f64>) -> Result<DesignMatrix> {
    let (n, p) = raw.shape();
    if p == 0 || n < p {
        return Err(Error::DimensionError(format!("need n >= p >= 1, got n = {n}, p = {p}")));
    }
    let mut values = raw.clone();
    let mut column_norms = Vec::with_capacity(p);
    for (j, mut col) in values.column_iter_mut().enumerate() {
        let norm = col.norm();
        if norm < ZERO_COLUMN_NORM {
            return Err(Error::ZeroColumn(j));
        }
        col /= norm;
        column_norms.push(norm);
    }
    let mut gram = gram(&values);
    for j in 0..p {
        gram[(j, j)] = 1.0;
    }
    if !min_eigenvalue_at_least(&gram, SINGULAR_EIGENVALUE) {
        let lam = min_eigenvalue(&gram);
        if lam < SINGULAR_EIGENVALUE {
            return Err(Error::SingularGram(lam));
        }
    }
    Ok(DesignMatrix {
        values,
        gram,
        column_norms,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::max_abs_diff;

    #[test]
    fn identity_is_unchanged() {
        let d = normalize_design(&DMatrix::identity(3, 3)).unwrap();
        assert_eq!(d.values(), &DMatrix::identity(3, 3));
        assert_eq!(d.gram(), &DMatrix::identity(3, 3));
        assert_eq!(d.column_norms(), &[1.0, 1.0, 1.0]);
    }

    #[test]
    fn column_is_scaled_and_norm_recorded() {
        let raw = DMatrix::from_column_slice(3, 2, &[3.0, 4.0, 0.0, 0.0, 0.0, 2.0]);
        let d = normalize_design(&raw).unwrap();
        assert!((d.values()[(0, 0)] - 0.6).abs() < 1e-15);
        assert!((d.values()[(1, 0)] - 0.8).abs() < 1e-15);
        assert_eq!(d.values()[(2, 0)], 0.0);
        assert_eq!(d.column_norms()[0], 5.0);
        assert!(max_abs_diff(d.gram(), &d.values().tr_mul(d.values())) < 1e-10);
    }

    #[test]
    fn duplicated_columns_are_singular() {
        let raw = DMatrix::from_column_slice(3, 2, &[1.0, 2.0, 3.0, 1.0, 2.0, 3.0]);
        assert!(matches!(normalize_design(&raw), Err(Error::SingularGram(_))));
    }

    #[test]
    fn zero_column_is_reported() {
        let raw = DMatrix::from_column_slice(3, 2, &[1.0, 2.0, 3.0, 0.0, 0.0, 0.0]);
        assert_eq!(normalize_design(&raw), Err(Error::ZeroColumn(1)));
    }

    #[test]
    fn wide_matrix_is_rejected() {
        let raw = DMatrix::from_element(2, 3, 1.0);
        assert!(matches!(normalize_design(&raw), Err(Error::DimensionError(_))));
    }
}
