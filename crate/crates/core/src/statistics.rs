//! Antisymmetric feature statistics `W` computed from an augmented design.
//!
//! Every statistic here is a function of the sufficient statistics
//! `([X X̃]ᵀ[X X̃], [X X̃]ᵀy)` only: the public entry points build a
//! [`SufficientStats`] and never touch the sample-space matrices afterwards.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};

use crate::construction::AugmentedDesign;
use crate::error::{Error, Result};
use crate::lasso::{entry_values_gram, lasso_solve_gram, EntryProfile, GridSpec};
use crate::linalg::{eigen_range, gram, Cholesky};

/// Condition number above which least-squares statistics are refused.
pub const MAX_CONDITION: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StatisticKind {
    /// `max(Z_j, Z̃_j) · sign(Z_j - Z̃_j)`, zero on ties.
    LassoSignedMax,
    /// `Z_j - Z̃_j`.
    LassoDifference,
    /// `X_jᵀy - X̃_jᵀy`.
    InnerProductDiff,
    /// `|X_jᵀy| - |X̃_jᵀy|`.
    AbsInnerProductDiff,
    /// `|β̂_j| - |β̂_{j+p}|` from least squares on `[X X̃]`.
    LeastSquaresAbsDiff,
    /// `β̂_j² - β̂_{j+p}²`.
    LeastSquaresSquaredDiff,
    /// `|β̂_j(λ)| - |β̂_{j+p}(λ)|` for a fixed Lasso penalty.
    LassoFixedLambda(f64),
}

impl StatisticKind {
    /// Stable CLI name.
    pub fn name(&self) -> String {
        match self {
            StatisticKind::LassoSignedMax => "lasso-signed-max".into(),
            StatisticKind::LassoDifference => "lasso-diff".into(),
            StatisticKind::InnerProductDiff => "ip-diff".into(),
            StatisticKind::AbsInnerProductDiff => "abs-ip-diff".into(),
            StatisticKind::LeastSquaresAbsDiff => "ls-abs-diff".into(),
            StatisticKind::LeastSquaresSquaredDiff => "ls-sq-diff".into(),
            StatisticKind::LassoFixedLambda(l) => format!("lasso-coef:{l}"),
        }
    }
}

impl fmt::Display for StatisticKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

impl FromStr for StatisticKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "lasso-signed-max" => StatisticKind::LassoSignedMax,
            "lasso-diff" => StatisticKind::LassoDifference,
            "ip-diff" => StatisticKind::InnerProductDiff,
            "abs-ip-diff" => StatisticKind::AbsInnerProductDiff,
            "ls-abs-diff" => StatisticKind::LeastSquaresAbsDiff,
            "ls-sq-diff" => StatisticKind::LeastSquaresSquaredDiff,
            other => match other.strip_prefix("lasso-coef:") {
                Some(l) => {
                    let lambda: f64 = l
                        .parse()
                        .map_err(|_| Error::InvalidArgument(format!("bad lambda in '{other}'")))?;
                    if !(lambda >= 0.0 && lambda.is_finite()) {
                        return Err(Error::InvalidArgument(format!("bad lambda in '{other}'")));
                    }
                    StatisticKind::LassoFixedLambda(lambda)
                }
                None => return Err(Error::InvalidArgument(format!("unknown statistic '{other}'"))),
            },
        })
    }
}

/// Per-feature statistics with the kind that produced them.
#[derive(Debug, Clone, PartialEq)]
pub struct WVector {
    pub w: Vec<f64>,
    pub kind: StatisticKind,
}

impl WVector {
    pub fn len(&self) -> usize {
        self.w.len()
    }

    pub fn is_empty(&self) -> bool {
        self.w.is_empty()
    }
}

/// `(AᵀA, Aᵀy)` for an augmented design `A = [X X̃]` with `2p` columns.
#[derive(Debug, Clone, PartialEq)]
pub struct SufficientStats {
    pub gram: DMatrix<f64>,
    pub aty: DVector<f64>,
}

impl SufficientStats {
    pub fn from_matrix(a: &DMatrix<f64>, y: &DVector<f64>) -> Result<Self> {
        if a.nrows() != y.len() {
            return Err(Error::DimensionError(format!(
                "design has {} rows, response has length {}",
                a.nrows(),
                y.len()
            )));
        }
        if !a.ncols().is_multiple_of(2) {
            return Err(Error::DimensionError(
                "augmented design needs an even column count".into(),
            ));
        }
        Ok(SufficientStats {
            gram: gram(a),
            aty: a.tr_mul(y),
        })
    }

    pub fn from_augmented(aug: &AugmentedDesign, y: &DVector<f64>) -> Result<Self> {
        Self::from_matrix(&aug.matrix(), y)
    }

    pub fn p(&self) -> usize {
        self.aty.len() / 2
    }
}

/// Statistic of the requested kind. `grid` only matters for path-based kinds.
pub fn compute_w(kind: StatisticKind, stats: &SufficientStats, grid: GridSpec) -> Result<WVector> {
    let p = stats.p();
    let w = match kind {
        StatisticKind::LassoSignedMax => {
            return Ok(w_from_entries(&entry_values_gram(&stats.gram, &stats.aty, grid)?));
        }
        StatisticKind::LassoDifference => {
            return Ok(w_entry_difference(&entry_values_gram(&stats.gram, &stats.aty, grid)?));
        }
        StatisticKind::InnerProductDiff => (0..p).map(|j| stats.aty[j] - stats.aty[j + p]).collect(),
        StatisticKind::AbsInnerProductDiff => (0..p).map(|j| stats.aty[j].abs() - stats.aty[j + p].abs()).collect(),
        StatisticKind::LeastSquaresAbsDiff | StatisticKind::LeastSquaresSquaredDiff => {
            let beta = least_squares(stats)?;
            let squared = kind == StatisticKind::LeastSquaresSquaredDiff;
            (0..p)
                .map(|j| {
                    let (a, b) = (beta[j], beta[j + p]);
                    if squared {
                        a * a - b * b
                    } else {
                        a.abs() - b.abs()
                    }
                })
                .collect()
        }
        StatisticKind::LassoFixedLambda(lambda) => {
            let beta = lasso_solve_gram(&stats.gram, &stats.aty, lambda, &DVector::zeros(2 * p))?;
            (0..p).map(|j| beta[j].abs() - beta[j + p].abs()).collect()
        }
    };
    Ok(WVector { w, kind })
}

fn least_squares(stats: &SufficientStats) -> Result<DVector<f64>> {
    let (lo, hi) = eigen_range(&stats.gram);
    let cond = if lo > 0.0 { hi / lo } else { f64::INFINITY };
    if cond > MAX_CONDITION {
        return Err(Error::SingularAugmentedGram(cond));
    }
    let chol = Cholesky::new(&stats.gram).ok_or(Error::SingularAugmentedGram(f64::INFINITY))?;
    Ok(chol.solve(&stats.aty))
}

fn signed_max(z: f64, zk: f64) -> f64 {
    if z > zk {
        z
    } else if z < zk {
        -zk
    } else {
        0.0
    }
}

/// `W_j = max(Z_j, Z̃_j) · sign(Z_j - Z̃_j)`, zero on ties.
pub fn w_from_entries(profile: &EntryProfile) -> WVector {
    let p = profile.z.len() / 2;
    WVector {
        w: (0..p).map(|j| signed_max(profile.z[j], profile.z[j + p])).collect(),
        kind: StatisticKind::LassoSignedMax,
    }
}

/// `W_j = Z_j - Z̃_j`.
pub fn w_entry_difference(profile: &EntryProfile) -> WVector {
    let p = profile.z.len() / 2;
    WVector {
        w: (0..p).map(|j| profile.z[j] - profile.z[j + p]).collect(),
        kind: StatisticKind::LassoDifference,
    }
}

/// Inner-product differences, signed or in absolute value.
pub fn w_inner_product(aug: &AugmentedDesign, y: &DVector<f64>, absolute: bool) -> Result<WVector> {
    let kind = if absolute {
        StatisticKind::AbsInnerProductDiff
    } else {
        StatisticKind::InnerProductDiff
    };
    compute_w(kind, &SufficientStats::from_augmented(aug, y)?, GridSpec::default())
}

/// Least-squares coefficient comparisons on the augmented design.
pub fn w_least_squares(aug: &AugmentedDesign, y: &DVector<f64>, squared: bool) -> Result<WVector> {
    let kind = if squared {
        StatisticKind::LeastSquaresSquaredDiff
    } else {
        StatisticKind::LeastSquaresAbsDiff
    };
    compute_w(kind, &SufficientStats::from_augmented(aug, y)?, GridSpec::default())
}

/// Lasso coefficient comparison at an explicit penalty.
pub fn w_fixed_lambda(aug: &AugmentedDesign, y: &DVector<f64>, lambda: f64) -> Result<WVector> {
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidArgument(format!("lambda must be >= 0, got {lambda}")));
    }
    compute_w(
        StatisticKind::LassoFixedLambda(lambda),
        &SufficientStats::from_augmented(aug, y)?,
        GridSpec::default(),
    )
}

/// Statistic computed straight from an augmented design.
pub fn w_for_design(kind: StatisticKind, aug: &AugmentedDesign, y: &DVector<f64>, grid: GridSpec) -> Result<WVector> {
    compute_w(kind, &SufficientStats::from_augmented(aug, y)?, grid)
}

/// Recomputes `W` on `[X X̃]` with the pairs in `swap` exchanged and returns
/// `max_j |W_j^swap - ε_j W_j|`, `ε_j = -1` on `swap` and `+1` elsewhere.
pub fn check_antisymmetry(
    kind: StatisticKind,
    aug: &AugmentedDesign,
    y: &DVector<f64>,
    swap: &[usize],
    grid: GridSpec,
) -> Result<f64> {
    let p = aug.p();
    if let Some(&j) = swap.iter().find(|&&j| j >= p) {
        return Err(Error::InvalidArgument(format!("swap index {j} out of range")));
    }
    let base = compute_w(kind, &SufficientStats::from_matrix(&aug.matrix(), y)?, grid)?;
    let swapped = compute_w(kind, &SufficientStats::from_matrix(&aug.swapped_matrix(swap), y)?, grid)?;
    let mut flip = vec![1.0; p];
    for &j in swap {
        flip[j] = -1.0;
    }
    Ok((0..p)
        .map(|j| (swapped.w[j] - flip[j] * base.w[j]).abs())
        .fold(0.0, f64::max))
}
