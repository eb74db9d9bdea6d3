//! Choices of the gap vector `s`, the per-feature decorrelation between each
//! original column and its knockoff.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{min_eigenvalue, min_eigenvalue_at_least, Cholesky};

const SINGULAR_EIGENVALUE: f64 = 1e-10;
/// Slack allowed on `λ_min(2Σ - diag(s))` before a gap is called infeasible.
pub const FEASIBILITY_SLACK: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum GapKind {
    Equicorrelated,
    Sdp,
    PartialDuplicate,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GapVector {
    pub s: Vec<f64>,
    pub kind: GapKind,
}

impl GapVector {
    pub fn sum(&self) -> f64 {
        self.s.iter().sum()
    }
}

/// `λ_min(2Σ - diag(s))`.
pub fn feasibility_margin(sigma: &DMatrix<f64>, s: &[f64]) -> f64 {
    let mut m = sigma * 2.0;
    for (j, sj) in s.iter().enumerate() {
        m[(j, j)] -= sj;
    }
    min_eigenvalue(&m)
}

/// Whether `2Σ - diag(s)` has no eigenvalue below `-slack`.
pub fn is_feasible(sigma: &DMatrix<f64>, s: &[f64], slack: f64) -> bool {
    let mut m = sigma * 2.0;
    for (j, sj) in s.iter().enumerate() {
        m[(j, j)] -= sj;
    }
    min_eigenvalue_at_least(&m, -slack)
}

fn checked_min_eigenvalue(sigma: &DMatrix<f64>) -> Result<f64> {
    let lam = min_eigenvalue(sigma);
    if lam < SINGULAR_EIGENVALUE {
        Err(Error::SingularGram(lam))
    } else {
        Ok(lam)
    }
}

/// Equicorrelated gap: `s_j = min(2 λ_min(Σ), 1)` for every feature.
pub fn equicorrelated_s(sigma: &DMatrix<f64>) -> Result<GapVector> {
    let lam = checked_min_eigenvalue(sigma)?;
    let value = (2.0 * lam).min(1.0);
    Ok(GapVector {
        s: vec![value; sigma.nrows()],
        kind: GapKind::Equicorrelated,
    })
}

/// Diagnostics from the barrier solver.
#[derive(Debug, Clone, PartialEq)]
pub struct SdpReport {
    /// `Σ_j s_j` at the returned point (after the feasibility shrink).
    pub objective: f64,
    /// Upper bound on the optimal `Σ_j s_j` certified by the barrier duality gap.
    pub bound: f64,
    pub outer_iterations: usize,
    pub newton_steps: usize,
    /// Shrink factor applied to the final iterate.
    pub shrink: f64,
}

const MAX_NEWTON_STEPS: usize = 200;
const MAX_OUTER_ITERATIONS: usize = 60;

/// SDP gap: maximizes `Σ_j s_j` subject to `0 ≤ s_j ≤ 1` and
/// `diag(s) ⪯ 2Σ`, via a log-det barrier interior-point method.
pub fn sdp_s(sigma: &DMatrix<f64>, tol: f64) -> Result<GapVector> {
    sdp_s_with_report(sigma, tol).map(|(gap, _)| gap)
}

/// [`sdp_s`] that falls back to the equicorrelated gap when the solver fails.
/// The fallback is logged at warn level.
pub fn sdp_s_or_equicorrelated(sigma: &DMatrix<f64>, tol: f64) -> Result<GapVector> {
    match sdp_s(sigma, tol) {
        Ok(gap) => Ok(gap),
        Err(Error::SolverDiverged(msg)) => {
            log::warn!("SDP gap solver diverged ({msg}); falling back to equicorrelated gap");
            equicorrelated_s(sigma)
        }
        Err(e) => Err(e),
    }
}

struct Barrier<'a> {
    sigma2: DMatrix<f64>,
    sigma: &'a DMatrix<f64>,
}

impl Barrier<'_> {
    fn slack(&self, s: &DVector<f64>) -> DMatrix<f64> {
        let mut m = self.sigma2.clone();
        for j in 0..s.len() {
            m[(j, j)] -= s[j];
        }
        m
    }

    /// Barrier objective `-t Σs - log det(2Σ - diag s) - Σ log s - Σ log(1-s)`,
    /// or `None` outside the open feasible region.
    fn value(&self, t: f64, s: &DVector<f64>) -> Option<f64> {
        if s.iter().any(|&v| v <= 0.0 || v >= 1.0) {
            return None;
        }
        Some(Self::value_with(t, s, &Cholesky::new(&self.slack(s))?))
    }

    fn value_with(t: f64, s: &DVector<f64>, slack_chol: &Cholesky) -> f64 {
        let box_terms: f64 = s.iter().map(|&v| v.ln() + (1.0 - v).ln()).sum();
        -t * s.sum() - slack_chol.ln_det() - box_terms
    }
}

/// [`sdp_s`] together with solver diagnostics.
pub fn sdp_s_with_report(sigma: &DMatrix<f64>, tol: f64) -> Result<(GapVector, SdpReport)> {
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument(format!("tol must be positive, got {tol}")));
    }
    let p = sigma.nrows();
    let lam = checked_min_eigenvalue(sigma)?;
    let barrier = Barrier {
        sigma2: sigma * 2.0,
        sigma,
    };

    let mut s = DVector::from_element(p, lam.min(0.5));
    let mut t = 1.0;
    let mut outer = 0;
    let mut newton_steps = 0;
    let pf = p as f64;

    loop {
        outer += 1;
        if outer > MAX_OUTER_ITERATIONS {
            return Err(Error::SolverDiverged("too many outer iterations".into()));
        }
        newton_steps += center(&barrier, t, &mut s)?;
        if pf / t < tol {
            break;
        }
        t *= 10.0;
    }

    // Barrier duality gap: 3p terms (p from log det, 2p from the box).
    let bound = s.sum() + 3.0 * pf / t;
    let shrink = feasibility_shrink(barrier.sigma, s.as_slice());
    // Barrier iterates never reach an active bound; entries within the
    // tolerance of zero are zero at the optimum.
    let s: Vec<f64> = s
        .iter()
        .map(|v| {
            let v = (v * shrink).clamp(0.0, 1.0);
            if v < tol {
                0.0
            } else {
                v
            }
        })
        .collect();
    let objective = s.iter().sum();
    Ok((
        GapVector { s, kind: GapKind::Sdp },
        SdpReport {
            objective,
            bound,
            outer_iterations: outer,
            newton_steps,
            shrink,
        },
    ))
}

/// Newton centering for a fixed barrier parameter. Returns the number of
/// Newton steps taken.
fn center(barrier: &Barrier<'_>, t: f64, s: &mut DVector<f64>) -> Result<usize> {
    let p = s.len();
    for step in 0..MAX_NEWTON_STEPS {
        let slack_chol = Cholesky::new(&barrier.slack(s))
            .ok_or_else(|| Error::SolverDiverged("iterate left the feasible region".into()))?;
        let slack_inv = slack_chol.inverse();
        let mut grad = DVector::zeros(p);
        let mut hess = DMatrix::zeros(p, p);
        for j in 0..p {
            let sj = s[j];
            grad[j] = -t + slack_inv[(j, j)] - 1.0 / sj + 1.0 / (1.0 - sj);
            for k in 0..p {
                hess[(j, k)] = slack_inv[(j, k)] * slack_inv[(j, k)];
            }
            hess[(j, j)] += 1.0 / (sj * sj) + 1.0 / ((1.0 - sj) * (1.0 - sj));
        }
        let dir = match Cholesky::new(&hess) {
            Some(c) => -c.solve(&grad),
            None => return Err(Error::SolverDiverged("Newton system not positive definite".into())),
        };
        let decrement = -grad.dot(&dir);
        if !decrement.is_finite() {
            return Err(Error::SolverDiverged("non-finite Newton decrement".into()));
        }
        let f0 = Barrier::value_with(t, s, &slack_chol);
        let rounding = 64.0 * f64::EPSILON * f0.abs();
        // below rounding level of the objective
        if decrement / 2.0 < 1e-12 || decrement < rounding {
            return Ok(step);
        }
        let mut alpha = 1.0;
        loop {
            let cand = &*s + &dir * alpha;
            if let Some(f) = barrier.value(t, &cand) {
                if f <= f0 - 0.25 * alpha * decrement {
                    if cand == *s {
                        return Ok(step + 1);
                    }
                    *s = cand;
                    // progress no longer measurable: the gradient is rounding-limited
                    if f0 - f <= rounding {
                        return Ok(step + 1);
                    }
                    break;
                }
            }
            alpha *= 0.5;
            if alpha < 1e-14 {
                // no further progress possible at this precision
                return Ok(step + 1);
            }
        }
    }
    Err(Error::SolverDiverged("Newton centering did not converge".into()))
}

/// Largest `γ ≤ 1` (to 1e-10) with `2Σ - diag(γ s)` positive semidefinite.
fn feasibility_shrink(sigma: &DMatrix<f64>, s: &[f64]) -> f64 {
    if feasibility_margin(sigma, s) >= 0.0 {
        return 1.0;
    }
    let (mut lo, mut hi) = (0.0, 1.0);
    let mut scaled = vec![0.0; s.len()];
    while hi - lo > 1e-10 {
        let mid = 0.5 * (lo + hi);
        for (d, v) in scaled.iter_mut().zip(s) {
            *d = v * mid;
        }
        if feasibility_margin(sigma, &scaled) >= 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}
