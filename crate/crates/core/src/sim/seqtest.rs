use rand::seq::index::sample;
use rand::Rng;
use rayon::prelude::*;

use crate::error::{check_level, Error, Result};
use crate::rng::{derive_seed, seeded};
use crate::sequential::{run_variant, PValueSequence, SequentialVariant};

use super::mean_se;

/// Synthetic sequential-testing harness: `m` hypotheses, `non_nulls` of them
/// at uniformly drawn positions with p-value `nonnull_p`, the rest uniform.
#[derive(Debug, Clone, PartialEq)]
pub struct SeqTestSpec {
    pub variant: SequentialVariant,
    pub m: usize,
    pub non_nulls: usize,
    pub nonnull_p: f64,
    pub c: f64,
    pub q: f64,
    pub trials: usize,
    pub seed: u64,
}

impl Default for SeqTestSpec {
    fn default() -> Self {
        SeqTestSpec {
            variant: SequentialVariant::Sstp1,
            m: 100,
            non_nulls: 20,
            nonnull_p: 0.01,
            c: 0.5,
            q: 0.2,
            trials: 10_000,
            seed: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeqTestSummary {
    pub spec: SeqTestSpec,
    pub fdr: f64,
    pub fdr_se: f64,
    /// `E[V / (R + offset)]` with the variant's offset (see [`modified_offset`]).
    pub modified_fdr: f64,
    pub modified_fdr_se: f64,
    pub mean_rejections: f64,
    pub power: f64,
}

/// Denominator offset of the modified FDR controlled by the 0-variants:
/// `c / ((1 - c) q)` for SSTP, `1 / ((1 - c) q)` for FSTP.
pub fn modified_offset(variant: SequentialVariant, c: f64, q: f64) -> f64 {
    match variant {
        SequentialVariant::Sstp0 | SequentialVariant::Sstp1 => c / ((1.0 - c) * q),
        SequentialVariant::Fstp0 | SequentialVariant::Fstp1 => 1.0 / ((1.0 - c) * q),
    }
}

pub fn run_seqtest(spec: &SeqTestSpec) -> Result<SeqTestSummary> {
    check_level(spec.q)?;
    if spec.non_nulls > spec.m || spec.trials == 0 {
        return Err(Error::InvalidArgument(format!(
            "need non_nulls <= m and trials >= 1, got {} / {} / {}",
            spec.non_nulls, spec.m, spec.trials
        )));
    }
    if !(0.0..=1.0).contains(&spec.nonnull_p) {
        return Err(Error::InvalidArgument(format!(
            "non-null p-value {} outside [0, 1]",
            spec.nonnull_p
        )));
    }
    let offset = modified_offset(spec.variant, spec.c, spec.q);
    let per_trial: Vec<(f64, f64, f64, f64)> = (0..spec.trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = seeded(derive_seed(spec.seed, t as u64, "seqtest"));
            let mut is_null = vec![true; spec.m];
            for j in sample(&mut rng, spec.m, spec.non_nulls) {
                is_null[j] = false;
            }
            let p: Vec<f64> = is_null
                .iter()
                .map(|&null| if null { rng.random::<f64>() } else { spec.nonnull_p })
                .collect();
            let seq = PValueSequence::with_all_stops(p, spec.c)?;
            let res = run_variant(&seq, spec.q, spec.variant)?;
            let r = res.rejected.len() as f64;
            let v = res.rejected.iter().filter(|&&j| is_null[j]).count() as f64;
            let power = if spec.non_nulls == 0 {
                0.0
            } else {
                (r - v) / spec.non_nulls as f64
            };
            Ok((v / r.max(1.0), v / (r + offset), r, power))
        })
        .collect::<Result<_>>()?;
    let column = |f: fn(&(f64, f64, f64, f64)) -> f64| per_trial.iter().map(f).collect::<Vec<f64>>();
    let (fdr, fdr_se) = mean_se(&column(|t| t.0));
    let (modified_fdr, modified_fdr_se) = mean_se(&column(|t| t.1));
    Ok(SeqTestSummary {
        spec: spec.clone(),
        fdr,
        fdr_se,
        modified_fdr,
        modified_fdr_se,
        mean_rejections: mean_se(&column(|t| t.2)).0,
        power: mean_se(&column(|t| t.3)).0,
    })
}
