use std::path::PathBuf;

use clap::Args;
use knockoff_core::filter::{knockoff_filter, FilterConfig, GapChoice};
use knockoff_core::lasso::GridSpec;
use knockoff_core::selection::write_selection_csv;
use knockoff_core::sim::{load_dataset, DropReason};
use knockoff_core::statistics::StatisticKind;
use knockoff_core::Error;

#[derive(Args)]
pub struct FilterArgs {
    /// Design CSV with a header row of feature names.
    #[arg(long)]
    design: PathBuf,
    /// Single-column response CSV.
    #[arg(long)]
    response: PathBuf,
    #[arg(long, default_value_t = 0.2)]
    q: f64,
    /// `equi` or `sdp`.
    #[arg(long, default_value = "sdp")]
    knockoff: GapChoice,
    #[arg(long, default_value = "lasso-signed-max")]
    statistic: StatisticKind,
    /// Use the knockoff+ threshold.
    #[arg(long)]
    plus: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = GridSpec::default().count)]
    grid_count: usize,
    #[arg(long, default_value_t = GridSpec::default().ratio)]
    grid_ratio: f64,
    /// Output path; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

pub fn run(args: FilterArgs) -> Result<(), Error> {
    let data = load_dataset(&args.design, &args.response)?;
    for d in &data.dropped {
        let why = match d.reason {
            DropReason::AllZero => "all zero".to_string(),
            DropReason::DuplicateOf(k) => format!("duplicate of column {}", k + 1),
        };
        eprintln!("dropped column {} '{}': {why}", d.index + 1, d.name);
    }
    let cfg = FilterConfig {
        q: args.q,
        plus: args.plus,
        gap: args.knockoff,
        statistic: args.statistic,
        grid: GridSpec {
            count: args.grid_count,
            ratio: args.grid_ratio,
        },
        seed: args.seed,
    };
    let out = knockoff_filter(&data.design, &data.y, &cfg)?;
    if out.rows_added > 0 {
        eprintln!("added {} rows to reach 2p observations", out.rows_added);
    }
    let labels: Vec<usize> = data.kept.iter().map(|j| j + 1).collect();
    let mut sink = crate::output(args.out.as_deref())?;
    write_selection_csv(&mut sink, &out.w, &out.selection, Some(&labels))?;
    sink.flush()?;
    eprintln!(
        "selected {} of {} features (threshold {})",
        out.selection.selected.len(),
        labels.len(),
        out.selection.threshold
    );
    Ok(())
}
