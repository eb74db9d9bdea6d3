use std::io::Write;
use std::path::PathBuf;

use clap::{Args, ValueEnum};
use knockoff_core::filter::GapChoice;
use knockoff_core::lasso::GridSpec;
use knockoff_core::sim::{
    run_experiment, write_results_csv, DesignKind, ExperimentSpec, ExperimentSummary, Method, SignalLayout,
};
use knockoff_core::statistics::StatisticKind;
use knockoff_core::Error;

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Setting {
    Table1,
    VaryK,
    VaryAmplitude,
    VaryRho,
    Orthogonal,
    Permutation,
}

#[derive(Args)]
pub struct SimulateArgs {
    #[arg(long, value_enum)]
    setting: Setting,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    p: Option<usize>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    amplitude: Option<f64>,
    /// Correlation parameter of the design (tapered or equal, per setting).
    #[arg(long)]
    rho: Option<f64>,
    #[arg(long, default_value_t = 0.2)]
    q: f64,
    #[arg(long)]
    trials: Option<usize>,
    /// Comma-separated: knockoff, knockoff-plus, bhq, bhq-log, bhq-white, permutation.
    #[arg(long, value_delimiter = ',')]
    methods: Option<Vec<Method>>,
    #[arg(long, default_value = "lasso-signed-max")]
    statistic: StatisticKind,
    /// `equi` or `sdp`.
    #[arg(long, default_value = "sdp")]
    knockoff: GapChoice,
    /// Comma-separated values of the swept parameter, replacing the default sweep.
    #[arg(long, value_delimiter = ',')]
    values: Option<Vec<f64>>,
    /// Run all methods on shared instances.
    #[arg(long)]
    paired: bool,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = GridSpec::default().count)]
    grid_count: usize,
    #[arg(long, default_value_t = GridSpec::default().ratio)]
    grid_ratio: f64,
    /// Output path; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Sweep {
    K,
    Amplitude,
    Rho,
}

impl Sweep {
    fn name(self) -> &'static str {
        match self {
            Sweep::K => "k",
            Sweep::Amplitude => "amplitude",
            Sweep::Rho => "rho",
        }
    }
}

fn steps(start: f64, step: f64, count: usize) -> Vec<f64> {
    (0..count)
        .map(|i| ((start + step * i as f64) * 1e6).round() / 1e6)
        .collect()
}

/// Base spec, swept parameter and its default values for a setting.
fn setting_defaults(setting: Setting) -> (ExperimentSpec, Option<(Sweep, Vec<f64>)>) {
    let base = ExperimentSpec::default();
    let three = vec![Method::Knockoff, Method::KnockoffPlus, Method::Bhq];
    match setting {
        Setting::Table1 => (base, None),
        Setting::VaryK => (
            ExperimentSpec {
                trials: 200,
                methods: three,
                ..base
            },
            Some((Sweep::K, steps(10.0, 10.0, 20))),
        ),
        Setting::VaryAmplitude => (
            ExperimentSpec {
                trials: 200,
                methods: three,
                ..base
            },
            Some((Sweep::Amplitude, steps(2.8, 0.1, 15))),
        ),
        Setting::VaryRho => (
            ExperimentSpec {
                trials: 200,
                methods: three,
                design: DesignKind::TaperedCorrelation(0.0),
                ..base
            },
            Some((Sweep::Rho, steps(0.0, 0.1, 10))),
        ),
        Setting::Orthogonal => (
            ExperimentSpec {
                n: 2000,
                p: 1000,
                k: 200,
                trials: 1000,
                design: DesignKind::Orthogonal,
                methods: vec![Method::KnockoffPlus, Method::Bhq],
                ..base
            },
            Some((Sweep::Amplitude, steps(1.0, 0.5, 9))),
        ),
        Setting::Permutation => (
            ExperimentSpec {
                n: 300,
                p: 100,
                k: 30,
                trials: 1000,
                design: DesignKind::EqualCorrelation(0.3),
                layout: SignalLayout::LeadingPositive,
                methods: vec![Method::Knockoff, Method::Permutation],
                ..base
            },
            None,
        ),
    }
}

fn with_rho(design: DesignKind, rho: f64) -> Result<DesignKind, Error> {
    match design {
        DesignKind::EqualCorrelation(_) => Ok(DesignKind::EqualCorrelation(rho)),
        DesignKind::TaperedCorrelation(_) => Ok(DesignKind::TaperedCorrelation(rho)),
        other => Err(Error::InvalidArgument(format!(
            "--rho does not apply to a {other} design"
        ))),
    }
}

fn apply_sweep(spec: &ExperimentSpec, sweep: Sweep, value: f64) -> Result<ExperimentSpec, Error> {
    let mut s = spec.clone();
    match sweep {
        Sweep::K => {
            if !(value >= 0.0 && value.fract() == 0.0) {
                return Err(Error::InvalidArgument(format!(
                    "k must be a nonnegative integer, got {value}"
                )));
            }
            s.k = value as usize;
        }
        Sweep::Amplitude => s.amplitude = value,
        Sweep::Rho => s.design = with_rho(s.design, value)?,
    }
    Ok(s)
}

fn build(args: &SimulateArgs) -> Result<(Vec<(Option<f64>, ExperimentSpec)>, Option<Sweep>), Error> {
    let (mut spec, sweep) = setting_defaults(args.setting);
    spec.n = args.n.unwrap_or(spec.n);
    spec.p = args.p.unwrap_or(spec.p);
    spec.k = args.k.unwrap_or(spec.k);
    spec.amplitude = args.amplitude.unwrap_or(spec.amplitude);
    if let Some(rho) = args.rho {
        spec.design = with_rho(spec.design, rho)?;
    }
    spec.q = args.q;
    spec.trials = args.trials.unwrap_or(spec.trials);
    if let Some(m) = &args.methods {
        spec.methods = m.clone();
    }
    spec.statistic = args.statistic;
    spec.gap = args.knockoff;
    spec.paired = args.paired;
    spec.seed = args.seed;
    spec.grid = GridSpec {
        count: args.grid_count,
        ratio: args.grid_ratio,
    };
    if spec.trials == 0 {
        return Err(Error::InvalidArgument("trials must be at least 1".into()));
    }
    let Some((sweep, defaults)) = sweep else {
        if args.values.is_some() {
            return Err(Error::InvalidArgument("--values needs a sweep setting".into()));
        }
        return Ok((vec![(None, spec)], None));
    };
    let explicit = match sweep {
        Sweep::K => args.k.map(|k| k as f64),
        Sweep::Amplitude => args.amplitude,
        Sweep::Rho => args.rho,
    };
    let values = match (&args.values, explicit) {
        (Some(v), _) => v.clone(),
        (None, Some(v)) => vec![v],
        (None, None) => defaults,
    };
    let runs = values
        .into_iter()
        .map(|v| Ok((Some(v), apply_sweep(&spec, sweep, v)?)))
        .collect::<Result<_, Error>>()?;
    Ok((runs, Some(sweep)))
}

pub fn run(args: SimulateArgs) -> Result<(), Error> {
    let (plan, sweep) = build(&args)?;
    for (_, spec) in &plan {
        spec.validate()?;
    }
    let mut results: Vec<(Option<f64>, ExperimentSummary)> = Vec::with_capacity(plan.len());
    for (value, spec) in plan {
        let summary = run_experiment(&spec)?;
        for m in &summary.methods {
            let label = match (sweep, value) {
                (Some(s), Some(v)) => format!("{}={v} ", s.name()),
                _ => String::new(),
            };
            let power = match (m.power, m.power_se) {
                (Some(p), Some(se)) => format!("{:.2}% (se {:.2})", 100.0 * p, 100.0 * se),
                _ => "n/a".into(),
            };
            eprintln!(
                "{label}{:<14} FDR {:.2}% (se {:.2})  power {power}",
                m.method.name(),
                100.0 * m.fdr,
                100.0 * m.fdr_se
            );
        }
        results.push((value, summary));
    }
    let mut out = crate::output(args.out.as_deref())?;
    write_results_csv(&mut out, &results, sweep.map(Sweep::name))?;
    out.flush()?;
    Ok(())
}
