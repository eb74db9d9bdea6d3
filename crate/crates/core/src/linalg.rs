//! Dense symmetric linear-algebra helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::rng::{gaussian_matrix, seeded};

/// Smallest eigenvalue of a symmetric matrix.
pub fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 {
        return f64::INFINITY;
    }
    SymmetricEigen::new(m.clone()).eigenvalues.min()
}

/// Extreme eigenvalues `(min, max)` of a symmetric matrix.
pub fn eigen_range(m: &DMatrix<f64>) -> (f64, f64) {
    let ev = SymmetricEigen::new(m.clone()).eigenvalues;
    (ev.min(), ev.max())
}

/// Returns `C` (r x p) with `CᵀC ≈ A`, built from the eigenvectors of `A`
/// whose eigenvalues exceed `clamp`. Smaller eigenvalues are treated as zero,
/// so `r` is the numerical rank of `A`.
pub fn psd_factor(a: &DMatrix<f64>, clamp: f64) -> DMatrix<f64> {
    let p = a.nrows();
    let eig = SymmetricEigen::new(a.clone());
    let keep: Vec<usize> = (0..p).filter(|&i| eig.eigenvalues[i] > clamp).collect();
    let mut c = DMatrix::zeros(keep.len(), p);
    for (row, &i) in keep.iter().enumerate() {
        let root = eig.eigenvalues[i].sqrt();
        for j in 0..p {
            c[(row, j)] = root * eig.eigenvectors[(j, i)];
        }
    }
    c
}

/// Symmetric square root `S` with `S·S ≈ M`, clamping eigenvalues below
/// `clamp` to zero.
pub fn psd_sqrt(m: &DMatrix<f64>, clamp: f64) -> DMatrix<f64> {
    let eig = SymmetricEigen::new(m.clone());
    let roots = eig.eigenvalues.map(|v| if v > clamp { v.sqrt() } else { 0.0 });
    let v = &eig.eigenvectors;
    v * DMatrix::from_diagonal(&roots) * v.transpose()
}

/// Lower Cholesky factor `L` with `L Lᵀ = M`, stored column-major with the
/// strict upper triangle zeroed.
#[derive(Debug, Clone)]
pub struct Cholesky {
    l: DMatrix<f64>,
}

const CHOLESKY_BLOCK: usize = 64;

impl Cholesky {
    /// Factors a symmetric matrix (only the lower triangle is read). `None`
    /// when a pivot is not strictly positive.
    pub fn new(m: &DMatrix<f64>) -> Option<Self> {
        let n = m.nrows();
        assert_eq!(n, m.ncols(), "Cholesky needs a square matrix");
        let mut l = m.clone();
        for k0 in (0..n).step_by(CHOLESKY_BLOCK) {
            let k1 = (k0 + CHOLESKY_BLOCK).min(n);
            let a = l.as_mut_slice();
            for j in k0..k1 {
                let (done, rest) = a.split_at_mut(j * n);
                let col = &mut rest[..n];
                for k in k0..j {
                    let ljk = done[k * n + j];
                    if ljk != 0.0 {
                        let src = &done[k * n + j..k * n + n];
                        for (c, s) in col[j..].iter_mut().zip(src) {
                            *c -= ljk * s;
                        }
                    }
                }
                let d = col[j];
                if !(d > 0.0) || !d.is_finite() {
                    return None;
                }
                let d = d.sqrt();
                col[j] = d;
                for c in &mut col[j + 1..] {
                    *c /= d;
                }
            }
            if k1 < n {
                let panel = l.view((k1, k0), (n - k1, k1 - k0)).into_owned();
                let mut trailing = l.view_mut((k1, k1), (n - k1, n - k1));
                trailing.gemm(-1.0, &panel, &panel.transpose(), 1.0);
            }
        }
        l.fill_upper_triangle(0.0, 1);
        Some(Cholesky { l })
    }

    pub fn l(&self) -> &DMatrix<f64> {
        &self.l
    }

    /// `log det M`.
    pub fn ln_det(&self) -> f64 {
        2.0 * self.l.diagonal().iter().map(|d| d.ln()).sum::<f64>()
    }

    /// Solves `M x = b` in place.
    pub fn solve_mut(&self, b: &mut [f64]) {
        let n = self.l.nrows();
        let l = self.l.as_slice();
        for j in 0..n {
            let x = b[j] / l[j * n + j];
            b[j] = x;
            for (bi, li) in b[j + 1..].iter_mut().zip(&l[j * n + j + 1..(j + 1) * n]) {
                *bi -= li * x;
            }
        }
        for j in (0..n).rev() {
            let col = &l[j * n + j + 1..(j + 1) * n];
            let dot: f64 = col.iter().zip(&b[j + 1..]).map(|(a, c)| a * c).sum();
            b[j] = (b[j] - dot) / l[j * n + j];
        }
    }

    pub fn solve(&self, b: &DVector<f64>) -> DVector<f64> {
        let mut x = b.clone();
        self.solve_mut(x.as_mut_slice());
        x
    }

    /// `L⁻¹`, lower triangular.
    pub fn l_inverse(&self) -> DMatrix<f64> {
        let n = self.l.nrows();
        let l = self.l.as_slice();
        let mut inv = DMatrix::zeros(n, n);
        for (c, mut col) in inv.column_iter_mut().enumerate() {
            let x = col.as_mut_slice();
            x[c] = 1.0;
            for j in c..n {
                let v = x[j] / l[j * n + j];
                x[j] = v;
                for (xi, li) in x[j + 1..].iter_mut().zip(&l[j * n + j + 1..(j + 1) * n]) {
                    *xi -= li * v;
                }
            }
        }
        inv
    }

    pub fn inverse(&self) -> DMatrix<f64> {
        gram(&self.l_inverse())
    }
}

/// Cholesky factor of a symmetric positive-definite matrix that can grow or
/// shrink by one row and column at a time in `O(k²)`.
#[derive(Debug, Clone, Default)]
pub struct UpdatableCholesky {
    /// Row `i` of the lower factor, `i + 1` entries.
    rows: Vec<Vec<f64>>,
}

impl UpdatableCholesky {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn clear(&mut self) {
        self.rows.clear();
    }

    /// Appends a row and column with entries `cross` against the existing
    /// ones and diagonal `diag`. A pivot below `min_pivot` is raised to it;
    /// returns `false` in that case.
    pub fn push(&mut self, cross: &[f64], diag: f64, min_pivot: f64) -> bool {
        debug_assert_eq!(cross.len(), self.len());
        let mut row = Vec::with_capacity(self.len() + 1);
        for (i, r) in self.rows.iter().enumerate() {
            let dot: f64 = r[..i].iter().zip(&row).map(|(a, b)| a * b).sum();
            row.push((cross[i] - dot) / r[i]);
        }
        let d2 = diag - row.iter().map(|v| v * v).sum::<f64>();
        let exact = d2 > min_pivot;
        row.push(if exact { d2 } else { min_pivot }.sqrt());
        self.rows.push(row);
        exact
    }

    /// Deletes row and column `pos`, restoring triangularity with Givens
    /// rotations.
    pub fn remove(&mut self, pos: usize) {
        self.rows.remove(pos);
        let k = self.rows.len();
        for c in pos..k {
            let (a, b) = (self.rows[c][c], self.rows[c][c + 1]);
            let r = a.hypot(b);
            let (cs, sn) = if r == 0.0 { (1.0, 0.0) } else { (a / r, b / r) };
            for row in &mut self.rows[c..] {
                let (x, y) = (row[c], row[c + 1]);
                row[c] = cs * x + sn * y;
                row[c + 1] = -sn * x + cs * y;
            }
            self.rows[c].truncate(c + 1);
        }
    }

    /// Solves `M x = b` in place.
    pub fn solve_mut(&self, b: &mut [f64]) {
        for (i, r) in self.rows.iter().enumerate() {
            let dot: f64 = r[..i].iter().zip(&b[..i]).map(|(a, c)| a * c).sum();
            b[i] = (b[i] - dot) / r[i];
        }
        for (i, r) in self.rows.iter().enumerate().rev() {
            let x = b[i] / r[i];
            b[i] = x;
            for (bj, l) in b[..i].iter_mut().zip(&r[..i]) {
                *bj -= l * x;
            }
        }
    }

    /// The factor as a dense lower-triangular matrix.
    pub fn to_matrix(&self) -> DMatrix<f64> {
        let k = self.len();
        DMatrix::from_fn(k, k, |i, j| if j <= i { self.rows[i][j] } else { 0.0 })
    }
}

/// Inverse of a symmetric positive-definite matrix, or `None` when the
/// Cholesky factorization fails.
pub fn spd_inverse(m: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    Cholesky::new(m).map(|c| c.inverse())
}

/// `Aᵀ B` through an explicit transpose, which lets the blocked product kernel
/// handle it.
pub fn t_mul(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    a.transpose() * b
}

/// `Xᵀ X` computed once and symmetrized.
pub fn gram(x: &DMatrix<f64>) -> DMatrix<f64> {
    let g = t_mul(x, x);
    (&g + g.transpose()) * 0.5
}

/// Whether `λ_min(m) ≥ bound`, decided by a Cholesky attempt on `m - bound I`.
pub fn min_eigenvalue_at_least(m: &DMatrix<f64>, bound: f64) -> bool {
    let mut shifted = m.clone();
    for j in 0..m.nrows() {
        shifted[(j, j)] -= bound;
    }
    Cholesky::new(&shifted).is_some()
}

/// Q factor (positive-diagonal R) of a tall matrix by Cholesky QR applied
/// twice; `None` when the Gram matrix is not numerically positive definite.
pub fn cholesky_qr(a: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let mut q = a.clone();
    for _ in 0..2 {
        let linv = Cholesky::new(&gram(&q))?.l_inverse();
        q = &q * linv.transpose();
    }
    Some(q)
}

fn q_factor(a: &DMatrix<f64>) -> DMatrix<f64> {
    cholesky_qr(a).unwrap_or_else(|| a.clone().qr().q())
}

/// An `n x r` matrix with orthonormal columns spanning a subspace orthogonal
/// to the columns of `x` (n x p, full column rank). Requires `n ≥ p + r`.
///
/// The basis is the trailing block of an orthonormal factorization of
/// `[X | G]` where `G` is a seeded Gaussian block, i.e. Gram-Schmidt applied to
/// `G` projected off `X`; it is projected off `X` and re-orthonormalized once
/// more.
pub fn orthonormal_complement(x: &DMatrix<f64>, r: usize, seed: u64) -> DMatrix<f64> {
    let (n, p) = x.shape();
    assert!(n >= p + r, "need n >= p + r for an orthogonal complement");
    if r == 0 {
        return DMatrix::zeros(n, 0);
    }
    let qx = q_factor(x);
    let mut u = gaussian_matrix(&mut seeded(seed), n, r);
    for _ in 0..2 {
        for _ in 0..2 {
            let proj = &qx * t_mul(&qx, &u);
            u -= proj;
        }
        u = q_factor(&u);
    }
    // Keep orientation deterministic: each column's largest-magnitude entry
    // is positive.
    for mut col in u.column_iter_mut() {
        let (imax, _) = col
            .iter()
            .enumerate()
            .fold((0, 0.0), |acc, (i, v)| if v.abs() > acc.1 { (i, v.abs()) } else { acc });
        if col[imax] < 0.0 {
            col.neg_mut();
        }
    }
    u
}

/// Largest absolute entry of `a - b`.
pub fn max_abs_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    a.iter().zip(b.iter()).fold(0.0_f64, |m, (x, y)| m.max((x - y).abs()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spd(n: usize, seed: u64) -> DMatrix<f64> {
        let x = gaussian_matrix(&mut seeded(seed), n + 3, n);
        gram(&x)
    }

    #[test]
    fn cholesky_matches_nalgebra() {
        let m = spd(17, 3);
        let ours = Cholesky::new(&m).unwrap();
        let theirs = m.clone().cholesky().unwrap();
        assert!(max_abs_diff(ours.l(), &theirs.l()) < 1e-12);
        assert!((ours.ln_det() - m.determinant().ln()).abs() < 1e-9);
    }

    #[test]
    fn cholesky_solve_and_inverse() {
        let m = spd(9, 4);
        let c = Cholesky::new(&m).unwrap();
        let b = DVector::from_fn(9, |i, _| i as f64 - 4.0);
        assert!((&m * c.solve(&b) - &b).amax() < 1e-10);
        assert!(max_abs_diff(&(&m * c.inverse()), &DMatrix::identity(9, 9)) < 1e-10);
    }

    #[test]
    fn updatable_cholesky_tracks_edits() {
        let m = spd(8, 5);
        let mut f = UpdatableCholesky::new();
        let mut order: Vec<usize> = Vec::new();
        for j in [3, 0, 6, 1, 7, 2] {
            let cross: Vec<f64> = order.iter().map(|&i| m[(i, j)]).collect();
            assert!(f.push(&cross, m[(j, j)], 1e-12));
            order.push(j);
        }
        for pos in [2, 0] {
            f.remove(pos);
            order.remove(pos);
        }
        let sub = DMatrix::from_fn(order.len(), order.len(), |a, b| m[(order[a], order[b])]);
        let l = f.to_matrix();
        assert!(max_abs_diff(&(&l * l.transpose()), &sub) < 1e-12);
        let reference = Cholesky::new(&sub).unwrap();
        assert!(max_abs_diff(&l, reference.l()) < 1e-10);
        let mut b = vec![1.0, -2.0, 0.5, 3.0];
        f.solve_mut(&mut b);
        let x = DVector::from_vec(b);
        assert!((&sub * x - DVector::from_vec(vec![1.0, -2.0, 0.5, 3.0])).amax() < 1e-10);
    }

    #[test]
    fn updatable_cholesky_flags_dependent_columns() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        let mut f = UpdatableCholesky::new();
        assert!(f.push(&[], 1.0, 1e-12));
        assert!(!f.push(&[m[(0, 1)]], m[(1, 1)], 1e-12));
        assert_eq!(f.len(), 2);
    }

    #[test]
    fn cholesky_qr_matches_householder_up_to_signs() {
        let a = gaussian_matrix(&mut seeded(8), 30, 6);
        let q = cholesky_qr(&a).unwrap();
        let h = a.clone().qr().q();
        assert!(max_abs_diff(&q.tr_mul(&q), &DMatrix::identity(6, 6)) < 1e-13);
        for j in 0..6 {
            let d = q.column(j).dot(&h.column(j)).abs();
            assert!((d - 1.0).abs() < 1e-12);
        }
        let r = q.tr_mul(&a);
        for i in 0..6 {
            assert!(r[(i, i)] > 0.0);
            for j in 0..i {
                assert!(r[(i, j)].abs() < 1e-12);
            }
        }
    }

    #[test]
    fn complement_is_trailing_block_of_stacked_factorization() {
        let x = gaussian_matrix(&mut seeded(11), 20, 4);
        let g = gaussian_matrix(&mut seeded(12), 20, 5);
        let mut stacked = DMatrix::zeros(20, 9);
        stacked.columns_mut(0, 4).copy_from(&x);
        stacked.columns_mut(4, 5).copy_from(&g);
        let h = stacked.qr().q();
        let u = orthonormal_complement(&x, 5, 12);
        for j in 0..5 {
            assert!((u.column(j).dot(&h.column(4 + j)).abs() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn l_inverse_inverts() {
        let c = Cholesky::new(&spd(7, 9)).unwrap();
        assert!(max_abs_diff(&(c.l() * c.l_inverse()), &DMatrix::identity(7, 7)) < 1e-12);
    }

    #[test]
    fn cholesky_rejects_indefinite() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(Cholesky::new(&m).is_none());
        assert!(Cholesky::new(&DMatrix::zeros(1, 1)).is_none());
    }

    #[test]
    fn complement_is_orthonormal_and_orthogonal() {
        let x = gaussian_matrix(&mut seeded(1), 12, 4);
        let q = x.clone().qr().q();
        let u = orthonormal_complement(&q, 5, 9);
        assert_eq!(u.shape(), (12, 5));
        assert!(max_abs_diff(&u.tr_mul(&u), &DMatrix::identity(5, 5)) < 1e-12);
        assert!(u.tr_mul(&x).amax() < 1e-12);
    }

    #[test]
    fn factor_reproduces_singular_psd() {
        let v = DMatrix::from_row_slice(3, 1, &[1.0, 2.0, -1.0]);
        let a = &v * v.transpose();
        let c = psd_factor(&a, 1e-10);
        assert_eq!(c.nrows(), 1);
        assert!(max_abs_diff(&c.tr_mul(&c), &a) < 1e-12);
    }

    #[test]
    fn sqrt_squares_back() {
        let m = DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]);
        let s = psd_sqrt(&m, 1e-12);
        assert!(max_abs_diff(&(&s * &s), &m) < 1e-12);
    }
}
