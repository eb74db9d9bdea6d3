//! End-to-end knockoff filter: build knockoffs, compute `W`, threshold.

use std::fmt;
use std::str::FromStr;

use nalgebra::DVector;

use crate::construction::{
    construct_knockoffs, construct_partial_knockoffs, duplicate_cycle_plan, equicorrelated_s, row_augment,
    sdp_s_or_equicorrelated, AugmentedDesign, DesignMatrix, GapVector, DEFAULT_SDP_TOL,
};
use crate::error::{check_level, Error, Result};
use crate::lasso::GridSpec;
use crate::rng::derive_seed;
use crate::selection::{threshold, SelectionResult};
use crate::statistics::{compute_w, StatisticKind, SufficientStats, WVector};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum GapChoice {
    Equicorrelated,
    Sdp,
}

impl GapChoice {
    pub fn name(self) -> &'static str {
        match self {
            GapChoice::Equicorrelated => "equi",
            GapChoice::Sdp => "sdp",
        }
    }

    pub fn solve(self, sigma: &nalgebra::DMatrix<f64>) -> Result<GapVector> {
        match self {
            GapChoice::Equicorrelated => equicorrelated_s(sigma),
            GapChoice::Sdp => sdp_s_or_equicorrelated(sigma, DEFAULT_SDP_TOL),
        }
    }
}

impl fmt::Display for GapChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for GapChoice {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "equi" => Ok(GapChoice::Equicorrelated),
            "sdp" => Ok(GapChoice::Sdp),
            other => Err(Error::InvalidArgument(format!("unknown knockoff kind '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FilterConfig {
    pub q: f64,
    pub plus: bool,
    pub gap: GapChoice,
    pub statistic: StatisticKind,
    pub grid: GridSpec,
    pub seed: u64,
}

impl Default for FilterConfig {
    fn default() -> Self {
        FilterConfig {
            q: 0.2,
            plus: true,
            gap: GapChoice::Sdp,
            statistic: StatisticKind::LassoSignedMax,
            grid: GridSpec::default(),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FilterOutput {
    pub augmented: AugmentedDesign,
    /// Response actually used (padded when rows were added).
    pub response: DVector<f64>,
    pub rows_added: usize,
    pub w: WVector,
    pub selection: SelectionResult,
}

/// Runs the knockoff (or knockoff+) filter. Designs with `p < n < 2p` are
/// first padded to `2p` rows with [`row_augment`].
pub fn knockoff_filter(design: &DesignMatrix, y: &DVector<f64>, cfg: &FilterConfig) -> Result<FilterOutput> {
    check_level(cfg.q)?;
    let (n, p) = (design.nrows(), design.ncols());
    if y.len() != n {
        return Err(Error::ShapeMismatch(format!(
            "response has length {}, design has {n} rows",
            y.len()
        )));
    }
    let padded;
    let (design, response, rows_added) = if n < 2 * p {
        padded = row_augment(design, y, derive_seed(cfg.seed, 0, "row-augment"))?;
        (&padded.0, padded.1.clone(), 2 * p - n)
    } else {
        (design, y.clone(), 0)
    };
    let gap = cfg.gap.solve(design.gram())?;
    let augmented = construct_knockoffs(design, &gap, derive_seed(cfg.seed, 0, "knockoffs"))?;
    let stats = SufficientStats::from_augmented(&augmented, &response)?;
    let w = compute_w(cfg.statistic, &stats, cfg.grid)?;
    let selection = threshold(&w, cfg.q, cfg.plus)?;
    Ok(FilterOutput {
        augmented,
        response,
        rows_added,
        w,
        selection,
    })
}

/// One round of [`knockoff_filter_cycling`].
#[derive(Debug, Clone, PartialEq)]
pub struct CycleOutcome {
    pub knockoffed: Vec<usize>,
    pub budget: f64,
    pub w: WVector,
    pub selection: SelectionResult,
}

/// Filter for `p < n < 2p` without estimating the noise level: features are
/// knockoffed in rounds of `n - p` (the rest duplicated, their `W` forced to
/// zero), each round run at level `q / rounds`. The overall selection is the
/// union over rounds.
pub fn knockoff_filter_cycling(
    design: &DesignMatrix,
    y: &DVector<f64>,
    cfg: &FilterConfig,
) -> Result<(Vec<usize>, Vec<CycleOutcome>)> {
    let (n, p) = (design.nrows(), design.ncols());
    if y.len() != n {
        return Err(Error::ShapeMismatch(format!(
            "response has length {}, design has {n} rows",
            y.len()
        )));
    }
    let plan = duplicate_cycle_plan(p, n, cfg.q)?;
    let mut rounds = Vec::with_capacity(plan.len());
    let mut selected = Vec::new();
    for (r, round) in plan.iter().enumerate() {
        let aug = construct_partial_knockoffs(design, &round.knockoffed, derive_seed(cfg.seed, r as u64, "cycle"))?;
        let stats = SufficientStats::from_augmented(&aug, y)?;
        let mut w = compute_w(cfg.statistic, &stats, cfg.grid)?;
        for &j in &round.duplicated {
            w.w[j] = 0.0;
        }
        let selection = threshold(&w, round.budget, cfg.plus)?;
        selected.extend(selection.selected.iter().copied());
        rounds.push(CycleOutcome {
            knockoffed: round.knockoffed.clone(),
            budget: round.budget,
            w,
            selection,
        });
    }
    selected.sort_unstable();
    selected.dedup();
    Ok((selected, rounds))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::construction::normalize_design;
    use crate::rng::{gaussian_matrix, seeded};

    fn problem(n: usize, p: usize, signals: usize, amp: f64) -> (DesignMatrix, DVector<f64>) {
        let d = normalize_design(&gaussian_matrix(&mut seeded(21), n, p)).unwrap();
        let mut beta = DVector::zeros(p);
        for j in 0..signals {
            beta[j] = amp;
        }
        let noise = gaussian_matrix(&mut seeded(22), n, 1).column(0).into_owned();
        let y = d.values() * beta + noise;
        (d, y)
    }

    #[test]
    fn strong_signals_are_found() {
        let (d, y) = problem(100, 20, 4, 8.0);
        let out = knockoff_filter(
            &d,
            &y,
            &FilterConfig {
                plus: false,
                q: 0.3,
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(out.rows_added, 0);
        for j in 0..4 {
            assert!(out.selection.selected.contains(&j), "{:?}", out.selection.selected);
        }
    }

    #[test]
    fn short_designs_are_padded() {
        let (d, y) = problem(30, 20, 3, 6.0);
        let out = knockoff_filter(&d, &y, &FilterConfig::default()).unwrap();
        assert_eq!(out.rows_added, 10);
        assert_eq!(out.response.len(), 40);
        assert_eq!(out.augmented.n(), 40);
    }

    #[test]
    fn cycling_covers_every_feature_once() {
        let (d, y) = problem(30, 20, 3, 6.0);
        let cfg = FilterConfig {
            gap: GapChoice::Equicorrelated,
            ..Default::default()
        };
        let (_, rounds) = knockoff_filter_cycling(&d, &y, &cfg).unwrap();
        assert_eq!(rounds.len(), 2);
        for r in &rounds {
            assert!((r.budget - 0.1).abs() < 1e-15);
            for j in 0..20 {
                if !r.knockoffed.contains(&j) {
                    assert_eq!(r.w.w[j], 0.0);
                }
            }
        }
    }

    #[test]
    fn gap_choice_names() {
        assert_eq!("equi".parse::<GapChoice>().unwrap(), GapChoice::Equicorrelated);
        assert_eq!("sdp".parse::<GapChoice>().unwrap(), GapChoice::Sdp);
        assert!("x".parse::<GapChoice>().is_err());
    }
}
