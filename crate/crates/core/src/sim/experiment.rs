use std::io::Write;

use rayon::prelude::*;

use crate::error::{Error, Result};

use super::instance::ExperimentSpec;
use super::mean_se;
use super::trial::{run_trial_methods, Method, TrialOutcome};

#[derive(Debug, Clone, PartialEq)]
pub struct MethodSummary {
    pub method: Method,
    pub trials: usize,
    pub fdr: f64,
    pub fdr_se: f64,
    /// `None` when no trial had signals.
    pub power: Option<f64>,
    pub power_se: Option<f64>,
    pub mean_selected: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSummary {
    pub spec: ExperimentSpec,
    /// Trial-major, methods in spec order within a trial.
    pub rows: Vec<TrialOutcome>,
    pub methods: Vec<MethodSummary>,
}

impl ExperimentSummary {
    pub fn method(&self, m: Method) -> Option<&MethodSummary> {
        self.methods.iter().find(|s| s.method == m)
    }
}

fn summarize(method: Method, rows: &[TrialOutcome]) -> MethodSummary {
    let mine: Vec<&TrialOutcome> = rows.iter().filter(|r| r.method == method).collect();
    let fdp: Vec<f64> = mine.iter().map(|r| r.fdp).collect();
    let power: Vec<f64> = mine.iter().filter_map(|r| r.power).collect();
    let (fdr, fdr_se) = mean_se(&fdp);
    let (power, power_se) = if power.is_empty() {
        (None, None)
    } else {
        let (m, se) = mean_se(&power);
        (Some(m), Some(se))
    };
    MethodSummary {
        method,
        trials: mine.len(),
        fdr,
        fdr_se,
        power,
        power_se,
        mean_selected: mine.iter().map(|r| r.n_selected as f64).sum::<f64>() / mine.len().max(1) as f64,
    }
}

/// Runs every trial of `spec` (in parallel when a thread pool is available)
/// and aggregates per method. Output is independent of scheduling.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<ExperimentSummary> {
    spec.validate()?;
    if spec.methods.is_empty() {
        return Err(Error::InvalidArgument("no methods requested".into()));
    }
    let per_trial: Vec<Vec<TrialOutcome>> = (0..spec.trials)
        .into_par_iter()
        .map(|t| run_trial_methods(spec, t))
        .collect::<Result<_>>()?;
    let rows: Vec<TrialOutcome> = per_trial.into_iter().flatten().collect();
    let methods = spec.methods.iter().map(|&m| summarize(m, &rows)).collect();
    Ok(ExperimentSummary {
        spec: spec.clone(),
        rows,
        methods,
    })
}

fn fmt_threshold(t: f64) -> String {
    if t.is_infinite() {
        "inf".into()
    } else {
        format!("{t}")
    }
}

/// Writes per-trial rows as CSV: `#` metadata lines, then
/// `trial,method,n_selected,false_selected,fdp,power,threshold`, with a
/// trailing column named `sweep` when several runs differ in one parameter.
/// Trials are written 1-based.
pub fn write_results_csv<W: Write>(
    out: W,
    runs: &[(Option<f64>, ExperimentSummary)],
    sweep: Option<&str>,
) -> Result<()> {
    let mut out = out;
    if let Some((_, first)) = runs.first() {
        let s = &first.spec;
        writeln!(
            out,
            "# n={} p={} k={} amplitude={} design={} sigma={} q={} trials={} statistic={} knockoff={} grid_count={} grid_ratio={} seed={} paired={}",
            s.n,
            s.p,
            s.k,
            s.amplitude,
            s.design,
            s.sigma,
            s.q,
            s.trials,
            s.statistic,
            s.gap,
            s.grid.count,
            s.grid.ratio,
            s.seed,
            s.paired
        )?;
    }
    if let Some(name) = sweep {
        let values: Vec<String> = runs.iter().filter_map(|(v, _)| v.map(|v| v.to_string())).collect();
        writeln!(out, "# sweep={name} values={}", values.join(";"))?;
    }
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec![
        "trial",
        "method",
        "n_selected",
        "false_selected",
        "fdp",
        "power",
        "threshold",
    ];
    if let Some(name) = sweep {
        header.push(name);
    }
    w.write_record(&header).map_err(csv_err)?;
    for (value, summary) in runs {
        for r in &summary.rows {
            let mut rec = vec![
                (r.trial + 1).to_string(),
                r.method.to_string(),
                r.n_selected.to_string(),
                r.false_selected.to_string(),
                r.fdp.to_string(),
                r.power.map(|v| v.to_string()).unwrap_or_default(),
                fmt_threshold(r.threshold),
            ];
            if sweep.is_some() {
                rec.push(value.map(|v| v.to_string()).unwrap_or_default());
            }
            w.write_record(&rec).map_err(csv_err)?;
        }
    }
    w.flush()?;
    Ok(())
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(e.to_string())
}
