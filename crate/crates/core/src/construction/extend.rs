//! Workarounds for designs with `p ≤ n < 2p`, where no `p`-dimensional
//! orthogonal complement of `X` exists.

use nalgebra::DVector;

use super::design::DesignMatrix;
use crate::error::{Error, Result};
use crate::linalg::spd_inverse;
use crate::rng::{seeded, standard_normal};

/// Unbiased residual standard deviation `sqrt(RSS / (n - p))` of the full
/// least-squares fit.
pub fn residual_sigma(design: &DesignMatrix, y: &DVector<f64>) -> Result<f64> {
    let (n, p) = (design.nrows(), design.ncols());
    if y.len() != n {
        return Err(Error::DimensionError(format!(
            "response has length {}, design has {n} rows",
            y.len()
        )));
    }
    if n <= p {
        return Err(Error::DegenerateResiduals);
    }
    let inv = spd_inverse(design.gram()).ok_or(Error::SingularGram(0.0))?;
    let beta = inv * design.xty(y);
    let resid = y - design.values() * beta;
    Ok((resid.norm_squared() / (n - p) as f64).sqrt())
}

/// Pads a design with `p ≤ n < 2p` to `2p` rows: the design gains zero rows and
/// the response gains `2p - n` seeded draws from `N(0, σ̂²)`.
pub fn row_augment(design: &DesignMatrix, y: &DVector<f64>, seed: u64) -> Result<(DesignMatrix, DVector<f64>)> {
    let (n, p) = (design.nrows(), design.ncols());
    if n < p || n >= 2 * p {
        return Err(Error::DimensionError(format!(
            "row augmentation applies to p <= n < 2p, got n = {n}, p = {p}"
        )));
    }
    if n == p {
        return Err(Error::DegenerateResiduals);
    }
    let sigma_hat = residual_sigma(design, y)?;
    let extra = 2 * p - n;
    let mut rng = seeded(seed);
    let mut response = DVector::zeros(2 * p);
    response.rows_mut(0, n).copy_from(y);
    for i in n..2 * p {
        response[i] = sigma_hat * standard_normal(&mut rng);
    }
    Ok((design.with_zero_rows(extra), response))
}

/// One round of the duplicate-cycling scheme.
#[derive(Debug, Clone, PartialEq)]
pub struct CycleRound {
    /// Indices whose knockoff is an exact copy (no power this round).
    pub duplicated: Vec<usize>,
    /// Indices that receive genuine knockoffs this round.
    pub knockoffed: Vec<usize>,
    /// FDR level spent on this round.
    pub budget: f64,
}

/// Splits the `p` features into rounds of at most `n - p` knockoffed indices so
/// that every index is knockoffed exactly once; each round gets `q / rounds`.
///
/// Indices are packed into contiguous chunks in ascending order, and rounds
/// visit the chunks from last to first.
pub fn duplicate_cycle_plan(p: usize, n: usize, q: f64) -> Result<Vec<CycleRound>> {
    crate::error::check_level(q)?;
    if p == 0 || n <= p {
        return Err(Error::DimensionError(format!(
            "duplicate cycling needs n > p >= 1, got n = {n}, p = {p}"
        )));
    }
    let width = (n - p).min(p);
    let chunks: Vec<Vec<usize>> = (0..p)
        .collect::<Vec<_>>()
        .chunks(width)
        .map(<[usize]>::to_vec)
        .collect();
    let budget = q / chunks.len() as f64;
    Ok(chunks
        .iter()
        .rev()
        .map(|knockoffed| CycleRound {
            duplicated: (0..p).filter(|j| !knockoffed.contains(j)).collect(),
            knockoffed: knockoffed.clone(),
            budget,
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::construction::normalize_design;
    use crate::rng::gaussian_matrix;
    use nalgebra::DMatrix;

    fn design(n: usize, p: usize) -> DesignMatrix {
        normalize_design(&gaussian_matrix(&mut seeded(5), n, p)).unwrap()
    }

    #[test]
    fn augment_pads_with_zero_rows() {
        let d = design(3, 2);
        let y = DVector::from_vec(vec![1.0, -0.5, 2.0]);
        let (aug, resp) = row_augment(&d, &y, 9).unwrap();
        assert_eq!(aug.nrows(), 4);
        assert!(aug.values().row(3).iter().all(|&v| v == 0.0));
        assert_eq!(resp.len(), 4);
        assert_eq!(resp.rows(0, 3), y.rows(0, 3));
        assert_eq!(aug.gram(), d.gram());
    }

    #[test]
    fn augment_boundaries() {
        let d = design(8, 4);
        let y = DVector::zeros(8);
        assert!(matches!(row_augment(&d, &y, 0), Err(Error::DimensionError(_))));
        let d = normalize_design(&DMatrix::identity(3, 3)).unwrap();
        let y = DVector::zeros(3);
        assert_eq!(row_augment(&d, &y, 0), Err(Error::DegenerateResiduals));
    }

    #[test]
    fn augment_noise_scale_tracks_residuals() {
        let d = design(40, 25);
        let y = crate::rng::gaussian_matrix(&mut seeded(1), 40, 1)
            .column(0)
            .into_owned()
            * 3.0;
        let sigma = residual_sigma(&d, &y).unwrap();
        let (_, resp) = row_augment(&d, &y, 4).unwrap();
        let extra = resp.rows(40, 10);
        assert!(extra.iter().all(|v| v.abs() < 6.0 * sigma));
    }

    #[test]
    fn plan_two_rounds() {
        let plan = duplicate_cycle_plan(4, 6, 0.2).unwrap();
        assert_eq!(plan.len(), 2);
        assert_eq!(plan[0].duplicated, vec![0, 1]);
        assert_eq!(plan[0].knockoffed, vec![2, 3]);
        assert_eq!(plan[1].duplicated, vec![2, 3]);
        assert_eq!(plan[1].knockoffed, vec![0, 1]);
        assert!(plan.iter().all(|r| (r.budget - 0.1).abs() < 1e-15));
    }

    #[test]
    fn plan_single_round_at_boundary() {
        let plan = duplicate_cycle_plan(4, 8, 0.2).unwrap();
        assert_eq!(plan.len(), 1);
        assert_eq!(plan[0].knockoffed, vec![0, 1, 2, 3]);
        assert!(plan[0].duplicated.is_empty());
        assert_eq!(plan[0].budget, 0.2);
    }

    #[test]
    fn plan_three_rounds() {
        let plan = duplicate_cycle_plan(6, 8, 0.3).unwrap();
        assert_eq!(plan.len(), 3);
        let mut seen: Vec<usize> = plan.iter().flat_map(|r| r.knockoffed.clone()).collect();
        seen.sort_unstable();
        assert_eq!(seen, (0..6).collect::<Vec<_>>());
        assert!(plan
            .iter()
            .all(|r| r.knockoffed.len() == 2 && (r.budget - 0.1).abs() < 1e-15));
    }

    #[test]
    fn plan_rejects_square_design() {
        assert!(matches!(duplicate_cycle_plan(4, 4, 0.2), Err(Error::DimensionError(_))));
    }
}
