use nalgebra::{DMatrix, DVector};

use super::design::DesignMatrix;
use super::gap::{feasibility_margin, is_feasible, GapKind, GapVector, FEASIBILITY_SLACK};
use crate::error::{Error, Result};
use crate::linalg::{orthonormal_complement, psd_factor, spd_inverse};

const FACTOR_CLAMP: f64 = 1e-10;

/// An original design together with knockoff copies `X̃` satisfying
/// `X̃ᵀX̃ = Σ` and `XᵀX̃ = Σ - diag(s)`.
#[derive(Debug, Clone, PartialEq)]
pub struct AugmentedDesign {
    pub original: DesignMatrix,
    pub knockoffs: DMatrix<f64>,
    pub gap: GapVector,
    pub seed: u64,
}

impl AugmentedDesign {
    pub fn n(&self) -> usize {
        self.original.nrows()
    }

    pub fn p(&self) -> usize {
        self.original.ncols()
    }

    /// `[X X̃]`, an `n x 2p` matrix.
    pub fn matrix(&self) -> DMatrix<f64> {
        let (n, p) = (self.n(), self.p());
        let mut m = DMatrix::zeros(n, 2 * p);
        m.columns_mut(0, p).copy_from(self.original.values());
        m.columns_mut(p, p).copy_from(&self.knockoffs);
        m
    }

    /// `[X X̃]` with columns `j` and `j + p` exchanged for every `j` in `swap`.
    pub fn swapped_matrix(&self, swap: &[usize]) -> DMatrix<f64> {
        let p = self.p();
        let mut m = self.matrix();
        for &j in swap {
            assert!(j < p, "swap index {j} out of range");
            m.swap_columns(j, j + p);
        }
        m
    }

    /// The `2p x 2p` Gram matrix `G` predicted by the construction.
    pub fn target_gram(&self) -> DMatrix<f64> {
        let p = self.p();
        let sigma = self.original.gram();
        let mut cross = sigma.clone();
        for j in 0..p {
            cross[(j, j)] -= self.gap.s[j];
        }
        let mut g = DMatrix::zeros(2 * p, 2 * p);
        g.view_mut((0, 0), (p, p)).copy_from(sigma);
        g.view_mut((p, p), (p, p)).copy_from(sigma);
        g.view_mut((0, p), (p, p)).copy_from(&cross);
        g.view_mut((p, 0), (p, p)).copy_from(&cross);
        g
    }

    /// `[X X̃]ᵀ y`.
    pub fn aty(&self, y: &DVector<f64>) -> DVector<f64> {
        self.matrix().tr_mul(y)
    }
}

/// Builds knockoffs `X̃ = X(I - Σ⁻¹diag(s)) + ŨC` for a design with `n ≥ 2p`.
///
/// `CᵀC = 2diag(s) - diag(s)Σ⁻¹diag(s)` is factored by symmetric
/// eigendecomposition (eigenvalues below 1e-10 dropped) and `Ũ` is an
/// orthonormal basis orthogonal to `X`, drawn deterministically from `seed`.
pub fn construct_knockoffs(design: &DesignMatrix, gap: &GapVector, seed: u64) -> Result<AugmentedDesign> {
    let (n, p) = (design.nrows(), design.ncols());
    if n < 2 * p {
        return Err(Error::DimensionError(format!(
            "knockoff construction needs n >= 2p, got n = {n}, p = {p}"
        )));
    }
    build(design, gap, seed)
}

/// Knockoffs for only the indices in `knockoffed`; every other column is
/// duplicated (`X̃_j = X_j`). Needs `n - p ≥ |knockoffed|`.
///
/// The knockoffed indices get the equicorrelated gap value.
pub fn construct_partial_knockoffs(design: &DesignMatrix, knockoffed: &[usize], seed: u64) -> Result<AugmentedDesign> {
    let (n, p) = (design.nrows(), design.ncols());
    if knockoffed.iter().any(|&j| j >= p) {
        return Err(Error::InvalidArgument("knockoffed index out of range".into()));
    }
    if n < p + knockoffed.len() {
        return Err(Error::DimensionError(format!(
            "{} knockoffs need n >= {}, got n = {n}",
            knockoffed.len(),
            p + knockoffed.len()
        )));
    }
    let value = super::gap::equicorrelated_s(design.gram())?.s[0];
    let mut s = vec![0.0; p];
    for &j in knockoffed {
        s[j] = value;
    }
    let gap = GapVector {
        s,
        kind: GapKind::PartialDuplicate,
    };
    build(design, &gap, seed)
}

fn build(design: &DesignMatrix, gap: &GapVector, seed: u64) -> Result<AugmentedDesign> {
    let (n, p) = (design.nrows(), design.ncols());
    if gap.s.len() != p {
        return Err(Error::DimensionError(format!(
            "gap vector has length {}, design has {p} columns",
            gap.s.len()
        )));
    }
    if let Some(j) = gap.s.iter().position(|v| !(v.is_finite() && *v >= 0.0)) {
        return Err(Error::InvalidArgument(format!(
            "gap entry {j} is negative or not finite"
        )));
    }
    let sigma = design.gram();
    if !is_feasible(sigma, &gap.s, FEASIBILITY_SLACK) {
        let margin = feasibility_margin(sigma, &gap.s);
        if margin < -FEASIBILITY_SLACK {
            return Err(Error::InfeasibleGap(margin));
        }
    }
    let sigma_inv = spd_inverse(sigma).ok_or(Error::SingularGram(0.0))?;

    // Σ⁻¹ diag(s): scale column j of Σ⁻¹ by s_j.
    let mut sinv_d = sigma_inv.clone();
    for (j, mut col) in sinv_d.column_iter_mut().enumerate() {
        col *= gap.s[j];
    }
    // A = 2 diag(s) - diag(s) Σ⁻¹ diag(s)
    let mut a = DMatrix::zeros(p, p);
    for i in 0..p {
        for j in 0..p {
            a[(i, j)] = -gap.s[i] * sinv_d[(i, j)];
        }
        a[(i, i)] += 2.0 * gap.s[i];
    }
    let a = (&a + a.transpose()) * 0.5;
    let c = psd_factor(&a, FACTOR_CLAMP);
    let rank = c.nrows();
    if n < p + rank {
        return Err(Error::DimensionError(format!(
            "Schur complement has rank {rank}; need n >= {}, got n = {n}",
            p + rank
        )));
    }

    let x = design.values();
    let mut knockoffs = x - x * &sinv_d;
    if rank > 0 {
        let u = orthonormal_complement(x, rank, seed);
        knockoffs += u * c;
    }
    Ok(AugmentedDesign {
        original: design.clone(),
        knockoffs,
        gap: gap.clone(),
        seed,
    })
}
