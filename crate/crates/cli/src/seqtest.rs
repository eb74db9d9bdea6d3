use std::io::Write;
use std::path::PathBuf;

use clap::Args;
use knockoff_core::sequential::SequentialVariant;
use knockoff_core::sim::{run_seqtest, SeqTestSpec};
use knockoff_core::Error;

#[derive(Args)]
pub struct SeqtestArgs {
    /// `fstp0`, `fstp1`, `sstp0` or `sstp1`.
    #[arg(long)]
    variant: SequentialVariant,
    #[arg(long, default_value_t = 0.5)]
    c: f64,
    #[arg(long, default_value_t = 0.2)]
    q: f64,
    /// Number of hypotheses.
    #[arg(long, default_value_t = 100)]
    m: usize,
    /// Number of non-null hypotheses, placed at random positions.
    #[arg(long, default_value_t = 20)]
    non_nulls: usize,
    /// p-value assigned to every non-null.
    #[arg(long, default_value_t = 0.01)]
    nonnull_p: f64,
    #[arg(long, default_value_t = 10_000)]
    trials: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

pub fn run(args: SeqtestArgs) -> Result<(), Error> {
    if !(args.c > 0.0 && args.c < 1.0) {
        return Err(Error::InvalidArgument(format!("c must lie in (0, 1), got {}", args.c)));
    }
    let spec = SeqTestSpec {
        variant: args.variant,
        m: args.m,
        non_nulls: args.non_nulls,
        nonnull_p: args.nonnull_p,
        c: args.c,
        q: args.q,
        trials: args.trials,
        seed: args.seed,
    };
    let s = run_seqtest(&spec)?;
    let mut out = crate::output(args.out.as_deref())?;
    writeln!(
        out,
        "# m={} non_nulls={} nonnull_p={} c={} q={} trials={} seed={}",
        spec.m, spec.non_nulls, spec.nonnull_p, spec.c, spec.q, spec.trials, spec.seed
    )?;
    writeln!(
        out,
        "variant,fdr,fdr_se,modified_fdr,modified_fdr_se,mean_rejections,power"
    )?;
    writeln!(
        out,
        "{},{},{},{},{},{},{}",
        spec.variant.name(),
        s.fdr,
        s.fdr_se,
        s.modified_fdr,
        s.modified_fdr_se,
        s.mean_rejections,
        s.power
    )?;
    out.flush()?;
    Ok(())
}
