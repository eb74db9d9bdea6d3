//! Comparison selectors: Benjamini–Hochberg on least-squares z-scores (plain,
//! with the harmonic log-factor correction, and with whitened noise), and the
//! row-permutation stand-in for knockoffs.

use std::f64::consts::SQRT_2;

use libm::erfc;
use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;

use crate::construction::DesignMatrix;
use crate::error::{check_level, Error, Result};
use crate::lasso::GridSpec;
use crate::linalg::{min_eigenvalue, psd_sqrt, spd_inverse};
use crate::rng::{seeded, standard_normal};
use crate::statistics::{compute_w, StatisticKind, SufficientStats, WVector};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ZSource {
    LeastSquares,
    Whitened,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ZScores {
    pub z: Vec<f64>,
    pub sigma: f64,
    pub source: ZSource,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BhqCorrection {
    None,
    /// Level divided by the harmonic number `S(p) = Σ_{i≤p} 1/i`.
    LogFactor,
}

/// Upper normal tail `P(N(0,1) ≥ x)`.
pub fn normal_tail(x: f64) -> f64 {
    0.5 * erfc(x / SQRT_2)
}

/// Two-sided p-value `2 Φ̄(|z|)`.
pub fn two_sided_p(z: f64) -> f64 {
    erfc(z.abs() / SQRT_2)
}

pub fn harmonic(p: usize) -> f64 {
    (1..=p).map(|i| 1.0 / i as f64).sum()
}

fn check_sigma(sigma: f64) -> Result<()> {
    if sigma > 0.0 && sigma.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("sigma must be positive, got {sigma}")))
    }
}

fn least_squares(design: &DesignMatrix, y: &DVector<f64>) -> Result<(DVector<f64>, DMatrix<f64>)> {
    if y.len() != design.nrows() {
        return Err(Error::DimensionError(format!(
            "response has length {}, design has {} rows",
            y.len(),
            design.nrows()
        )));
    }
    let inv = spd_inverse(design.gram()).ok_or_else(|| Error::SingularGram(min_eigenvalue(design.gram())))?;
    let beta = &inv * design.xty(y);
    Ok((beta, inv))
}

/// `z_j = β̂_j / (σ sqrt((Σ⁻¹)_jj))` from the full least-squares fit.
pub fn ls_zscores(design: &DesignMatrix, y: &DVector<f64>, sigma: f64) -> Result<ZScores> {
    check_sigma(sigma)?;
    let (beta, inv) = least_squares(design, y)?;
    Ok(ZScores {
        z: (0..beta.len())
            .map(|j| beta[j] / (sigma * inv[(j, j)].sqrt()))
            .collect(),
        sigma,
        source: ZSource::LeastSquares,
    })
}

/// BHq step-up on two-sided normal p-values. Returns the rejected indices
/// (ascending) and the `|z|` cutoff, `+∞` when nothing is rejected.
pub fn bhq_select_with_threshold(z: &ZScores, q: f64, correction: BhqCorrection) -> Result<(Vec<usize>, f64)> {
    check_level(q)?;
    let m = z.z.len();
    let level = match correction {
        BhqCorrection::None => q,
        BhqCorrection::LogFactor => q / harmonic(m),
    };
    let pvals: Vec<f64> = z.z.iter().map(|&v| two_sided_p(v)).collect();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| pvals[a].total_cmp(&pvals[b]));
    let cutoff_rank = (1..=m)
        .rev()
        .find(|&i| pvals[order[i - 1]] <= i as f64 * level / m as f64);
    Ok(match cutoff_rank {
        Some(k) => {
            let pcut = pvals[order[k - 1]];
            let mut rejected: Vec<usize> = (0..m).filter(|&j| pvals[j] <= pcut).collect();
            rejected.sort_unstable();
            let t = rejected.iter().map(|&j| z.z[j].abs()).fold(f64::INFINITY, f64::min);
            (rejected, t)
        }
        None => (Vec::new(), f64::INFINITY),
    })
}

/// BHq rejection set.
pub fn bhq_select(z: &ZScores, q: f64, correction: BhqCorrection) -> Result<Vec<usize>> {
    bhq_select_with_threshold(z, q, correction).map(|(r, _)| r)
}

/// z-scores after adding independent noise `N(0, σ²(λ₀⁻¹I - Σ⁻¹))` so that the
/// perturbed estimate has covariance `σ²λ₀⁻¹I`; `λ₀ = λ_min(Σ)`.
pub fn whitened_zscores(design: &DesignMatrix, y: &DVector<f64>, sigma: f64, seed: u64) -> Result<ZScores> {
    check_sigma(sigma)?;
    let lam0 = min_eigenvalue(design.gram());
    if lam0 <= 0.0 {
        return Err(Error::SingularGram(lam0));
    }
    let (beta, inv) = least_squares(design, y)?;
    let p = beta.len();
    let cov = DMatrix::identity(p, p) / lam0 - &inv;
    let root = psd_sqrt(&((&cov + cov.transpose()) * 0.5), 1e-12);
    let mut rng = seeded(seed);
    let e = DVector::from_iterator(p, (0..p).map(|_| standard_normal(&mut rng)));
    let noise = root * e * sigma;
    let scale = sigma / lam0.sqrt();
    Ok(ZScores {
        z: (0..p).map(|j| (beta[j] + noise[j]) / scale).collect(),
        sigma,
        source: ZSource::Whitened,
    })
}

/// BHq on whitened z-scores (no correction).
pub fn bhq_whitened(design: &DesignMatrix, y: &DVector<f64>, sigma: f64, q: f64, seed: u64) -> Result<Vec<usize>> {
    bhq_select(&whitened_zscores(design, y, sigma, seed)?, q, BhqCorrection::None)
}

/// Applies one uniformly drawn row permutation to every column:
/// `Xπ[i, j] = X[π(i), j]`.
pub fn permute_design(design: &DesignMatrix, seed: u64) -> DMatrix<f64> {
    let mut perm: Vec<usize> = (0..design.nrows()).collect();
    perm.shuffle(&mut seeded(seed));
    permute_rows(design.values(), &perm)
}

/// Row `i` of the result is row `perm[i]` of `x`.
pub fn permute_rows(x: &DMatrix<f64>, perm: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(x.nrows(), x.ncols(), |i, j| x[(perm[i], j)])
}

/// Statistics computed on `[X Xπ]`, i.e. with the permuted design standing in
/// for the knockoffs.
pub fn permutation_w(
    design: &DesignMatrix,
    y: &DVector<f64>,
    seed: u64,
    kind: StatisticKind,
    grid: GridSpec,
) -> Result<WVector> {
    let (n, p) = (design.nrows(), design.ncols());
    let mut a = DMatrix::zeros(n, 2 * p);
    a.columns_mut(0, p).copy_from(design.values());
    a.columns_mut(p, p).copy_from(&permute_design(design, seed));
    compute_w(kind, &SufficientStats::from_matrix(&a, y)?, grid)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::construction::normalize_design;
    use crate::linalg::max_abs_diff;
    use crate::rng::gaussian_matrix;

    fn zs(z: &[f64]) -> ZScores {
        ZScores {
            z: z.to_vec(),
            sigma: 1.0,
            source: ZSource::LeastSquares,
        }
    }

    #[test]
    #[allow(clippy::excessive_precision)]
    fn normal_tail_reference_values() {
        // scipy.stats.norm.sf
        let rel = |a: f64, b: f64| ((a - b) / b).abs();
        let cases = [
            (-3.0, 0.998_650_101_968_369_91),
            (0.5, 0.308_537_538_725_986_9),
            (1.959_963_984_540_054, 0.025_000_000_000_000_011),
            (3.3, 4.834_241_423_837_775_1e-4),
            (5.0, 2.866_515_718_791_939_1e-7),
            (6.5, 4.016_000_583_859_117_8e-11),
            (8.0, 6.220_960_574_271_784_1e-16),
        ];
        for (x, want) in cases {
            assert!(rel(normal_tail(x), want) < 1e-14, "tail({x})");
        }
        assert!(rel(normal_tail(20.0), 2.753_624_118_606_233_7e-89) < 1e-12);
        assert!(rel(two_sided_p(4.0), 6.334_248_366_623_984_3e-5) < 1e-14);
        assert_eq!(two_sided_p(0.0), 1.0);
    }

    #[test]
    fn bhq_examples() {
        let z = zs(&[4.0, 0.1, 0.2]);
        assert_eq!(bhq_select(&z, 0.2, BhqCorrection::None).unwrap(), vec![0]);
        assert_eq!(bhq_select(&z, 0.2, BhqCorrection::LogFactor).unwrap(), vec![0]);
        assert!(bhq_select(&zs(&[0.0; 4]), 0.2, BhqCorrection::None).unwrap().is_empty());
        assert!((harmonic(3) - 11.0 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn ls_zscores_orthogonal_and_scaling() {
        let q = gaussian_matrix(&mut seeded(1), 12, 4).qr().q();
        let d = normalize_design(&q).unwrap();
        let y = gaussian_matrix(&mut seeded(2), 12, 1).column(0).into_owned();
        let z1 = ls_zscores(&d, &y, 1.0).unwrap();
        let xty = d.xty(&y);
        for j in 0..4 {
            assert!((z1.z[j] - xty[j]).abs() < 1e-10);
        }
        let z2 = ls_zscores(&d, &y, 2.0).unwrap();
        for j in 0..4 {
            assert!((z2.z[j] - z1.z[j] / 2.0).abs() < 1e-12);
        }
        let z0 = ls_zscores(&d, &DVector::zeros(12), 1.0).unwrap();
        assert!(z0.z.iter().all(|&v| v == 0.0));
        assert!(ls_zscores(&d, &y, 0.0).is_err());
    }

    #[test]
    fn whitening_vanishes_for_identity_gram() {
        let q = gaussian_matrix(&mut seeded(5), 10, 3).qr().q();
        let d = normalize_design(&q).unwrap();
        let y = gaussian_matrix(&mut seeded(6), 10, 1).column(0) * 3.0;
        let w = whitened_zscores(&d, &y, 1.0, 3).unwrap();
        let l = ls_zscores(&d, &y, 1.0).unwrap();
        for j in 0..3 {
            assert!((w.z[j] - l.z[j]).abs() < 1e-6);
        }
        assert_eq!(
            bhq_whitened(&d, &y, 1.0, 0.2, 3).unwrap(),
            bhq_select(&l, 0.2, BhqCorrection::None).unwrap()
        );
    }

    #[test]
    fn whitening_is_seeded() {
        let d = normalize_design(&gaussian_matrix(&mut seeded(7), 30, 5)).unwrap();
        let y = gaussian_matrix(&mut seeded(8), 30, 1).column(0).into_owned();
        assert_eq!(
            whitened_zscores(&d, &y, 1.0, 4).unwrap(),
            whitened_zscores(&d, &y, 1.0, 4).unwrap()
        );
    }

    #[test]
    fn permutation_examples() {
        let x = DMatrix::from_column_slice(3, 1, &[1.0, 2.0, 3.0]);
        let p = permute_rows(&x, &[2, 0, 1]);
        assert_eq!(p.as_slice(), &[3.0, 1.0, 2.0]);

        let single = normalize_design(&DMatrix::from_row_slice(1, 1, &[2.0])).unwrap();
        assert_eq!(&permute_design(&single, 9), single.values());

        let d = normalize_design(&gaussian_matrix(&mut seeded(3), 15, 4)).unwrap();
        let xp = permute_design(&d, 11);
        assert!(max_abs_diff(&xp.tr_mul(&xp), &d.values().tr_mul(d.values())) < 1e-12);
    }
}
