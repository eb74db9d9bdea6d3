use std::fmt;
use std::str::FromStr;

use crate::baselines::{bhq_select_with_threshold, ls_zscores, permutation_w, whitened_zscores, BhqCorrection};
use crate::error::{Error, Result};
use crate::filter::{knockoff_filter, FilterConfig};
use crate::rng::derive_seed;
use crate::selection::threshold;

use super::instance::{generate_instance, ExperimentSpec, Instance};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    Knockoff,
    KnockoffPlus,
    Bhq,
    BhqLog,
    BhqWhite,
    /// Row-permuted design in place of knockoffs, knockoff threshold.
    Permutation,
}

impl Method {
    pub const ALL: [Method; 6] = [
        Method::Knockoff,
        Method::KnockoffPlus,
        Method::Bhq,
        Method::BhqLog,
        Method::BhqWhite,
        Method::Permutation,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Knockoff => "knockoff",
            Method::KnockoffPlus => "knockoff-plus",
            Method::Bhq => "bhq",
            Method::BhqLog => "bhq-log",
            Method::BhqWhite => "bhq-white",
            Method::Permutation => "permutation",
        }
    }

    /// Tag for the method's auxiliary randomness. Both knockoff thresholds
    /// share one tag so they see the same knockoffs.
    fn aux_tag(self) -> &'static str {
        match self {
            Method::Knockoff | Method::KnockoffPlus => "knockoff",
            other => other.name(),
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown method '{s}'")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TrialSeeds {
    /// Drives design, coefficients and noise.
    pub instance: u64,
    /// Drives knockoff completion, row padding, whitening or permutation.
    pub aux: u64,
}

/// Seeds for `method` in trial `trial`. With `paired` every method sees the
/// same instance.
pub fn trial_seeds(master: u64, trial: usize, method: Method, paired: bool) -> TrialSeeds {
    let instance = if paired {
        derive_seed(master, trial as u64, "instance")
    } else {
        derive_seed(derive_seed(master, trial as u64, "instance"), 0, method.aux_tag())
    };
    TrialSeeds {
        instance,
        aux: derive_seed(master, trial as u64, method.aux_tag()),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialOutcome {
    pub trial: usize,
    pub method: Method,
    pub k: usize,
    pub n_selected: usize,
    pub false_selected: usize,
    pub fdp: f64,
    /// `None` when there are no true signals.
    pub power: Option<f64>,
    /// Knockoff threshold `T`, or the BHq cutoff on `|z|`; `+∞` when nothing
    /// can be selected.
    pub threshold: f64,
}

fn outcome(trial: usize, method: Method, inst: &Instance, selected: &[usize], threshold: f64) -> TrialOutcome {
    let false_selected = selected.iter().filter(|&&j| !inst.is_signal(j)).count();
    let n_selected = selected.len();
    let k = inst.support.len();
    TrialOutcome {
        trial,
        method,
        k,
        n_selected,
        false_selected,
        fdp: false_selected as f64 / n_selected.max(1) as f64,
        power: (k > 0).then(|| (n_selected - false_selected) as f64 / k as f64),
        threshold,
    }
}

fn filter_config(spec: &ExperimentSpec, plus: bool, seed: u64) -> FilterConfig {
    FilterConfig {
        q: spec.q,
        plus,
        gap: spec.gap,
        statistic: spec.statistic,
        grid: spec.grid,
        seed,
    }
}

fn apply(spec: &ExperimentSpec, method: Method, inst: &Instance, aux: u64) -> Result<(Vec<usize>, f64)> {
    let (d, y) = (&inst.design, &inst.y);
    match method {
        Method::Knockoff | Method::KnockoffPlus => {
            let out = knockoff_filter(d, y, &filter_config(spec, method == Method::KnockoffPlus, aux))?;
            Ok((out.selection.selected, out.selection.threshold))
        }
        Method::Bhq => bhq_select_with_threshold(&ls_zscores(d, y, spec.sigma)?, spec.q, BhqCorrection::None),
        Method::BhqLog => bhq_select_with_threshold(&ls_zscores(d, y, spec.sigma)?, spec.q, BhqCorrection::LogFactor),
        Method::BhqWhite => {
            bhq_select_with_threshold(&whitened_zscores(d, y, spec.sigma, aux)?, spec.q, BhqCorrection::None)
        }
        Method::Permutation => {
            let w = permutation_w(d, y, aux, spec.statistic, spec.grid)?;
            let sel = threshold(&w, spec.q, false)?;
            Ok((sel.selected, sel.threshold))
        }
    }
}

/// Runs one method on trial `trial` of the experiment.
pub fn run_trial(spec: &ExperimentSpec, method: Method, trial: usize) -> Result<TrialOutcome> {
    let seeds = trial_seeds(spec.seed, trial, method, spec.paired);
    let inst = generate_instance(spec, seeds.instance)?;
    let (selected, t) = apply(spec, method, &inst, seeds.aux)?;
    Ok(outcome(trial, method, &inst, &selected, t))
}

/// Runs every method of the spec on trial `trial`, in the spec's order.
/// Equivalent to calling [`run_trial`] per method, but paired runs share the
/// instance and both knockoff thresholds share one `W`.
pub(crate) fn run_trial_methods(spec: &ExperimentSpec, trial: usize) -> Result<Vec<TrialOutcome>> {
    if !spec.paired {
        return spec.methods.iter().map(|&m| run_trial(spec, m, trial)).collect();
    }
    let inst = generate_instance(spec, derive_seed(spec.seed, trial as u64, "instance"))?;
    let mut shared_w = None;
    let mut rows = Vec::with_capacity(spec.methods.len());
    for &method in &spec.methods {
        let aux = trial_seeds(spec.seed, trial, method, true).aux;
        let (selected, t) = match method {
            Method::Knockoff | Method::KnockoffPlus => {
                if shared_w.is_none() {
                    shared_w = Some(knockoff_filter(&inst.design, &inst.y, &filter_config(spec, false, aux))?.w);
                }
                let sel = threshold(shared_w.as_ref().unwrap(), spec.q, method == Method::KnockoffPlus)?;
                (sel.selected, sel.threshold)
            }
            other => apply(spec, other, &inst, aux)?,
        };
        rows.push(outcome(trial, method, &inst, &selected, t));
    }
    Ok(rows)
}
