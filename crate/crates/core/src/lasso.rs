//! Lasso solutions along a geometric λ grid and the entry values
//! `Z_j = sup{λ : β̂_j(λ) ≠ 0}`, quantized to the grid.
//!
//! All solvers work from the sufficient statistics `(AᵀA, Aᵀy)`; the
//! matrix-level entry points only form those products and delegate.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{gram, UpdatableCholesky};

/// Convergence threshold on the largest coefficient change over a full sweep.
pub const SWEEP_TOL: f64 = 1e-9;
/// Magnitude above which a coefficient counts as active.
pub const ACTIVE_TOL: f64 = 1e-9;
pub const MAX_SWEEPS: usize = 100_000;
const ACTIVE_SWEEPS: usize = 20;
/// Relative pivot floor for the active-set factor.
const MIN_PIVOT: f64 = 1e-10;

/// Grid resolution: number of points and `λ_min / λ_max`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub count: usize,
    pub ratio: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            count: 200,
            ratio: 1e-3,
        }
    }
}

/// Geometrically spaced, strictly decreasing penalties starting at `λ_max`.
///
/// A zero `λ_max` (response orthogonal to every column) yields an empty grid.
#[derive(Debug, Clone, PartialEq)]
pub struct LambdaGrid {
    values: Vec<f64>,
    ratio: f64,
    count: usize,
}

impl LambdaGrid {
    pub fn geometric(lambda_max: f64, spec: GridSpec) -> Result<Self> {
        if spec.count < 2 {
            return Err(Error::InvalidArgument(format!(
                "grid needs at least 2 points, got {}",
                spec.count
            )));
        }
        if !(spec.ratio > 0.0 && spec.ratio < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "grid ratio must lie in (0, 1), got {}",
                spec.ratio
            )));
        }
        if !(lambda_max >= 0.0 && lambda_max.is_finite()) {
            return Err(Error::InvalidArgument(format!("invalid lambda_max {lambda_max}")));
        }
        let values = if lambda_max == 0.0 {
            Vec::new()
        } else {
            let log_step = spec.ratio.ln() / (spec.count - 1) as f64;
            (0..spec.count)
                .map(|i| lambda_max * (log_step * i as f64).exp())
                .collect()
        };
        Ok(LambdaGrid {
            values,
            ratio: spec.ratio,
            count: spec.count,
        })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn ratio(&self) -> f64 {
        self.ratio
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn lambda_max(&self) -> f64 {
        self.values.first().copied().unwrap_or(0.0)
    }
}

/// Entry values for every column of the augmented design: `z[j]` for the
/// originals and `z[j + p]` for the knockoffs; 0 when a column never enters.
#[derive(Debug, Clone, PartialEq)]
pub struct EntryProfile {
    pub z: Vec<f64>,
    pub grid: LambdaGrid,
}

/// Smallest penalty with an all-zero Lasso solution: `max_j |A_jᵀy|`.
pub fn lambda_max(a: &DMatrix<f64>, y: &DVector<f64>) -> f64 {
    lambda_max_from_aty(&a.tr_mul(y))
}

pub fn lambda_max_from_aty(aty: &DVector<f64>) -> f64 {
    aty.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
}

fn soft_threshold(z: f64, lambda: f64) -> f64 {
    if z > lambda {
        z - lambda
    } else if z < -lambda {
        z + lambda
    } else {
        0.0
    }
}

/// Coordinate-descent state for `½bᵀGb - bᵀc + λ‖b‖₁`, keeping the
/// residual correlations `r = c - Gb` current. Coordinates are updated in
/// blocks `(i, i + m/2)`, which for an augmented design are the
/// original/knockoff pairs.
struct Solver<'a> {
    gram: &'a DMatrix<f64>,
    aty: &'a DVector<f64>,
    beta: DVector<f64>,
    resid: DVector<f64>,
    sweeps: usize,
    /// Factor of the Gram block on `factored`, reused across penalties.
    factor: UpdatableCholesky,
    factored: Vec<usize>,
}

impl<'a> Solver<'a> {
    fn new(gram: &'a DMatrix<f64>, aty: &'a DVector<f64>, warm: DVector<f64>) -> Self {
        let mut s = Solver {
            gram,
            aty,
            resid: aty.clone(),
            beta: warm,
            sweeps: 0,
            factor: UpdatableCholesky::new(),
            factored: Vec::new(),
        };
        s.refresh_residual();
        s
    }

    fn refresh_residual(&mut self) {
        self.resid.copy_from(self.aty);
        for (j, &b) in self.beta.iter().enumerate() {
            if b != 0.0 {
                self.resid.axpy(-b, &self.gram.column(j), 1.0);
            }
        }
    }

    fn objective(&self, lambda: f64) -> f64 {
        let quad = -0.5 * self.beta.dot(&(self.aty + &self.resid));
        quad + lambda * self.beta.iter().map(|b| b.abs()).sum::<f64>()
    }

    fn update(&mut self, j: usize, lambda: f64) -> f64 {
        let g = self.gram[(j, j)];
        if g <= 0.0 {
            return 0.0;
        }
        let old = self.beta[j];
        let new = soft_threshold(self.resid[j] + g * old, lambda) / g;
        let delta = new - old;
        if delta != 0.0 {
            self.beta[j] = new;
            self.resid.axpy(-delta, &self.gram.column(j), 1.0);
        }
        delta.abs()
    }

    /// Exact minimization over the pair `(j, k)` with every other
    /// coefficient held fixed. The candidates cover every support and sign
    /// pattern, so the best of them is the block minimizer; the midpoint of the
    /// two single-coordinate candidates goes first so that exchangeable columns
    /// share the weight instead of favouring the lower index.
    fn update_pair(&mut self, j: usize, k: usize, lambda: f64) -> f64 {
        let (a, c, d) = (self.gram[(j, j)], self.gram[(j, k)], self.gram[(k, k)]);
        if a <= 0.0 || d <= 0.0 {
            return self.update(j, lambda).max(self.update(k, lambda));
        }
        let (bj, bk) = (self.beta[j], self.beta[k]);
        let uj = self.resid[j] + a * bj + c * bk;
        let uk = self.resid[k] + c * bj + d * bk;
        let f = |x: f64, y: f64| {
            0.5 * (a * x * x + 2.0 * c * x * y + d * y * y) - uj * x - uk * y + lambda * (x.abs() + y.abs())
        };

        let only_j = soft_threshold(uj, lambda) / a;
        let only_k = soft_threshold(uk, lambda) / d;
        let mid = (0.5 * only_j, 0.5 * only_k);
        let singles = [(0.0, 0.0), (only_j, 0.0), (0.0, only_k)];
        let det = a * d - c * c;
        let (x, y) = if det > 1e-14 * a * d {
            let mut candidates = vec![mid];
            candidates.extend(singles);
            for (sj, sk) in [(1.0, 1.0), (1.0, -1.0), (-1.0, 1.0), (-1.0, -1.0)] {
                let (rj, rk) = (uj - lambda * sj, uk - lambda * sk);
                let x = (d * rj - c * rk) / det;
                let y = (a * rk - c * rj) / det;
                if x * sj > 0.0 && y * sk > 0.0 {
                    candidates.push((x, y));
                }
            }
            best_of(&candidates, f)
        } else {
            // Collinear pair. With equal norms only `x ± y` matters and the
            // minimizers form a segment: solve for the sum with symmetrized
            // correlations, split it evenly, and stay put if already on it.
            let sign = c.signum();
            if (a - d).abs() <= 1e-12 * a {
                let total = soft_threshold(0.5 * (uj + sign * uk), lambda) / (0.5 * (a + d));
                let now = bj + sign * bk;
                let same_sign = bj * sign * bk >= 0.0;
                if same_sign && (now - total).abs() <= 1e-12 * total.abs() {
                    (bj, bk)
                } else {
                    (0.5 * total, 0.5 * sign * total)
                }
            } else {
                best_of(&[mid, singles[0], singles[1], singles[2]], f)
            }
        };
        let (dj, dk) = (x - bj, y - bk);
        if dj != 0.0 {
            self.beta[j] = x;
            self.resid.axpy(-dj, &self.gram.column(j), 1.0);
        }
        if dk != 0.0 {
            self.beta[k] = y;
            self.resid.axpy(-dk, &self.gram.column(k), 1.0);
        }
        dj.abs().max(dk.abs())
    }

    /// One pass over the blocks in `blocks`: block `i < m/2` is the pair
    /// `(i, i + m/2)`, and for odd `m` block `m/2` is the last coordinate alone.
    fn sweep(&mut self, blocks: impl Iterator<Item = usize>, lambda: f64) -> Result<f64> {
        self.sweeps += 1;
        if self.sweeps > MAX_SWEEPS {
            return Err(Error::MaxIterations(MAX_SWEEPS));
        }
        let half = self.beta.len() / 2;
        let mut max_change = 0.0_f64;
        for i in blocks {
            let change = if i < half {
                self.update_pair(i, i + half, lambda)
            } else {
                self.update(self.beta.len() - 1, lambda)
            };
            max_change = max_change.max(change);
        }
        Ok(max_change)
    }

    fn block_count(&self) -> usize {
        self.beta.len().div_ceil(2)
    }

    fn active_blocks(&self) -> Vec<usize> {
        let m = self.beta.len();
        let half = m / 2;
        (0..self.block_count())
            .filter(|&i| {
                if i < half {
                    self.beta[i] != 0.0 || self.beta[i + half] != 0.0
                } else {
                    self.beta[m - 1] != 0.0
                }
            })
            .collect()
    }

    /// Brings the cached factor in line with the current nonzero pattern.
    /// Nonzero coordinates whose columns are numerically dependent on the
    /// factored ones are left out; the orthant step holds them fixed.
    fn sync_factor(&mut self) {
        let m = self.beta.len();
        let mut pos = 0;
        while pos < self.factored.len() {
            if self.beta[self.factored[pos]] == 0.0 {
                self.factor.remove(pos);
                self.factored.remove(pos);
            } else {
                pos += 1;
            }
        }
        let mut in_factor = vec![false; m];
        for &j in &self.factored {
            in_factor[j] = true;
        }
        for j in 0..m {
            if self.beta[j] != 0.0 && !in_factor[j] {
                let g = self.gram;
                let cross: Vec<f64> = self.factored.iter().map(|&i| g[(i, j)]).collect();
                if self
                    .factor
                    .push(&cross, g[(j, j)], MIN_PIVOT * g[(j, j)].max(f64::MIN_POSITIVE))
                {
                    self.factored.push(j);
                } else {
                    self.factor.remove(self.factor.len() - 1);
                }
            }
        }
    }

    /// Active-set refinement: repeatedly solves the smooth problem on the
    /// orthant of the current nonzero pattern and moves towards its minimizer,
    /// stopping at the first coefficient that would change sign (which is set
    /// to zero and leaves the active set). Steps that fail to decrease the
    /// objective are undone. Returns whether the objective decreased.
    fn orthant_step(&mut self, lambda: f64) -> bool {
        let mut improved = false;
        for _ in 0..self.beta.len() {
            self.sync_factor();
            let k = self.factored.len();
            if k == 0 {
                break;
            }
            let mut in_factor = vec![false; self.beta.len()];
            for &j in &self.factored {
                in_factor[j] = true;
            }
            let held: Vec<usize> = (0..self.beta.len())
                .filter(|&h| self.beta[h] != 0.0 && !in_factor[h])
                .collect();
            let mut x: Vec<f64> = self
                .factored
                .iter()
                .map(|&j| {
                    let fixed: f64 = held.iter().map(|&h| self.gram[(j, h)] * self.beta[h]).sum();
                    self.aty[j] - fixed - lambda * self.beta[j].signum()
                })
                .collect();
            self.factor.solve_mut(&mut x);
            if x.iter().any(|v| !v.is_finite()) {
                break;
            }
            // largest step keeping every active sign
            let mut step = 1.0_f64;
            let mut blocking = None;
            for (a, &j) in self.factored.iter().enumerate() {
                let (b, v) = (self.beta[j], x[a]);
                if v == 0.0 || v.signum() != b.signum() {
                    let t = b / (b - v);
                    if t < step {
                        step = t;
                        blocking = Some(a);
                    }
                }
            }
            let before = self.objective(lambda);
            let saved = self.beta.clone();
            for (a, &j) in self.factored.iter().enumerate() {
                let b = self.beta[j];
                let next = if blocking == Some(a) {
                    0.0
                } else {
                    b + step * (x[a] - b)
                };
                self.beta[j] = if next.signum() == b.signum() { next } else { 0.0 };
            }
            self.refresh_residual();
            if !(self.objective(lambda) < before) {
                self.beta = saved;
                self.refresh_residual();
                break;
            }
            improved = true;
            if blocking.is_none() {
                break;
            }
        }
        improved
    }

    /// Runs to convergence at `lambda`: each round takes an exact step on the
    /// active orthant, then a full sweep, then (if needed) sweeps over the
    /// active set. Convergence is declared only on a full sweep.
    fn solve(&mut self, lambda: f64, mut trace: Option<&mut Vec<f64>>) -> Result<()> {
        self.sweeps = 0;
        self.refresh_residual();
        loop {
            let stepped = self.orthant_step(lambda);
            if stepped {
                if let Some(t) = trace.as_deref_mut() {
                    t.push(self.objective(lambda));
                }
            }
            let change = self.sweep(0..self.block_count(), lambda)?;
            if let Some(t) = trace.as_deref_mut() {
                t.push(self.objective(lambda));
            }
            if change < SWEEP_TOL {
                return Ok(());
            }
            let active = self.active_blocks();
            for _ in 0..ACTIVE_SWEEPS {
                let change = self.sweep(active.iter().copied(), lambda)?;
                if let Some(t) = trace.as_deref_mut() {
                    t.push(self.objective(lambda));
                }
                if change < SWEEP_TOL {
                    break;
                }
            }
        }
    }
}

/// Candidate with the smallest objective, the earliest on ties.
fn best_of(candidates: &[(f64, f64)], f: impl Fn(f64, f64) -> f64) -> (f64, f64) {
    let mut best = candidates[0];
    let mut value = f(best.0, best.1);
    for &(x, y) in &candidates[1..] {
        let v = f(x, y);
        if v < value {
            (best, value) = ((x, y), v);
        }
    }
    best
}

fn check_shapes(gram: &DMatrix<f64>, aty: &DVector<f64>, warm: Option<&DVector<f64>>) -> Result<()> {
    let m = aty.len();
    if gram.shape() != (m, m) || warm.is_some_and(|w| w.len() != m) {
        return Err(Error::DimensionError(format!(
            "Gram {:?}, correlations {m}, warm start {:?}",
            gram.shape(),
            warm.map(|w| w.len())
        )));
    }
    Ok(())
}

/// Minimizer of `½‖y - Ab‖² + λ‖b‖₁` by cyclic (paired) coordinate descent from `warm`.
pub fn lasso_solve(a: &DMatrix<f64>, y: &DVector<f64>, lambda: f64, warm: &DVector<f64>) -> Result<DVector<f64>> {
    lasso_solve_gram(&gram(a), &a.tr_mul(y), lambda, warm)
}

/// [`lasso_solve`] from the sufficient statistics `G = AᵀA`, `c = Aᵀy`.
pub fn lasso_solve_gram(
    gram: &DMatrix<f64>,
    aty: &DVector<f64>,
    lambda: f64,
    warm: &DVector<f64>,
) -> Result<DVector<f64>> {
    lasso_solve_traced(gram, aty, lambda, warm).map(|(b, _)| b)
}

/// [`lasso_solve_gram`] that also returns the objective (up to the constant
/// `½‖y‖²`) after every sweep.
pub fn lasso_solve_traced(
    gram: &DMatrix<f64>,
    aty: &DVector<f64>,
    lambda: f64,
    warm: &DVector<f64>,
) -> Result<(DVector<f64>, Vec<f64>)> {
    check_shapes(gram, aty, Some(warm))?;
    if !(lambda >= 0.0) {
        return Err(Error::InvalidArgument(format!("lambda must be >= 0, got {lambda}")));
    }
    let mut solver = Solver::new(gram, aty, warm.clone());
    let mut trace = vec![solver.objective(lambda)];
    solver.solve(lambda, Some(&mut trace))?;
    Ok((solver.beta, trace))
}

/// Warm-started solutions at every grid value, largest λ first.
pub fn lasso_path_gram(gram: &DMatrix<f64>, aty: &DVector<f64>, grid: &LambdaGrid) -> Result<Vec<DVector<f64>>> {
    check_shapes(gram, aty, None)?;
    let mut solver = Solver::new(gram, aty, DVector::zeros(aty.len()));
    grid.values()
        .iter()
        .map(|&lambda| {
            solver.solve(lambda, None)?;
            Ok(solver.beta.clone())
        })
        .collect()
}

/// Entry values of every column of `A` along a geometric grid from
/// `λ_max(A, y)` down to `ratio · λ_max`.
pub fn entry_values(a: &DMatrix<f64>, y: &DVector<f64>, spec: GridSpec) -> Result<EntryProfile> {
    entry_values_gram(&gram(a), &a.tr_mul(y), spec)
}

/// [`entry_values`] from the sufficient statistics.
pub fn entry_values_gram(gram: &DMatrix<f64>, aty: &DVector<f64>, spec: GridSpec) -> Result<EntryProfile> {
    check_shapes(gram, aty, None)?;
    let m = aty.len();
    let grid = LambdaGrid::geometric(lambda_max_from_aty(aty), spec)?;
    let mut z = vec![0.0; m];
    let mut entered = 0;
    let mut solver = Solver::new(gram, aty, DVector::zeros(m));
    for &lambda in grid.values() {
        solver.solve(lambda, None)?;
        for j in 0..m {
            if z[j] == 0.0 && solver.beta[j].abs() > ACTIVE_TOL {
                z[j] = lambda;
                entered += 1;
            }
        }
        if entered == m {
            break;
        }
    }
    Ok(EntryProfile { z, grid })
}
