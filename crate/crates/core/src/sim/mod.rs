//! Synthetic experiments and data ingestion.

mod dataset;
mod experiment;
mod instance;
mod seqtest;
mod trial;

pub use dataset::{
    clean_design, load_dataset, parse_design_csv, parse_response_csv, DropReason, DroppedColumn, LoadedDataset,
};
pub use experiment::{run_experiment, write_results_csv, ExperimentSummary, MethodSummary};
pub use instance::{generate_instance, DesignKind, ExperimentSpec, Instance, SignalLayout};
pub use seqtest::{modified_offset, run_seqtest, SeqTestSpec, SeqTestSummary};
pub use trial::{run_trial, trial_seeds, Method, TrialOutcome, TrialSeeds};

/// Mean and standard error of the mean.
pub fn mean_se(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}
