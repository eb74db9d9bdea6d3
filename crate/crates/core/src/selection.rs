//! Data-dependent thresholds for the knockoff and knockoff+ filters.

use std::io::Write;

use crate::error::{check_level, Result};
use crate::statistics::WVector;

/// Relative distance below which two magnitudes count as the same candidate.
pub const MERGE_RTOL: f64 = 1e-12;

/// Whether `larger ≥ smaller` are distinct candidate magnitudes.
pub(crate) fn magnitudes_differ(larger: f64, smaller: f64) -> bool {
    larger - smaller > MERGE_RTOL * larger
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelectionResult {
    /// Threshold `T`, `+∞` when no candidate qualifies.
    pub threshold: f64,
    /// Selected indices in ascending order: `{j : W_j ≥ T}`.
    pub selected: Vec<usize>,
    /// Estimated FDP at `T` (the offset alone when `T = +∞`).
    pub fdp_estimate: f64,
    pub plus: bool,
    pub q: f64,
}

/// `(offset + #{W_j ≤ -t}) / max(#{W_j ≥ t}, 1)` with offset 1 for knockoff+.
pub fn fdp_hat(w: &WVector, t: f64, plus: bool) -> f64 {
    let neg = w.w.iter().filter(|&&v| v <= -t).count();
    let pos = w.w.iter().filter(|&&v| v >= t).count();
    (f64::from(u8::from(plus)) + neg as f64) / pos.max(1) as f64
}

/// Distinct nonzero `|W_j|` in ascending order, with near-duplicates merged
/// into their smallest member.
pub fn candidate_thresholds(w: &WVector) -> Vec<f64> {
    let mut mags: Vec<f64> = w.w.iter().map(|v| v.abs()).filter(|&v| v > 0.0).collect();
    mags.sort_by(f64::total_cmp);
    let mut out: Vec<f64> = Vec::new();
    let mut last = f64::NAN;
    for m in mags {
        if out.is_empty() || magnitudes_differ(m, last) {
            out.push(m);
        }
        last = m;
    }
    out
}

/// Smallest candidate `t` whose estimated FDP is at most `q`, and the
/// features with `W_j ≥ t`.
pub fn threshold(w: &WVector, q: f64, plus: bool) -> Result<SelectionResult> {
    check_level(q)?;
    let offset = f64::from(u8::from(plus));

    // Entries sorted by magnitude so each candidate's tail counts come from a
    // suffix scan.
    let mut entries: Vec<f64> = w.w.iter().copied().filter(|v| *v != 0.0).collect();
    entries.sort_by(|a, b| a.abs().total_cmp(&b.abs()));
    let total = entries.len();
    let mut pos_suffix = vec![0usize; total + 1];
    let mut neg_suffix = vec![0usize; total + 1];
    for i in (0..total).rev() {
        pos_suffix[i] = pos_suffix[i + 1] + usize::from(entries[i] > 0.0);
        neg_suffix[i] = neg_suffix[i + 1] + usize::from(entries[i] < 0.0);
    }

    let mut chosen = None;
    let mut i = 0;
    while i < total {
        let t = entries[i].abs();
        let ratio = (offset + neg_suffix[i] as f64) / pos_suffix[i].max(1) as f64;
        if ratio <= q {
            chosen = Some((t, ratio));
            break;
        }
        // skip the rest of this candidate's cluster
        let mut last = t;
        while i < total && !magnitudes_differ(entries[i].abs(), last) {
            last = entries[i].abs();
            i += 1;
        }
    }

    Ok(match chosen {
        Some((t, ratio)) => SelectionResult {
            threshold: t,
            selected: (0..w.len()).filter(|&j| w.w[j] >= t).collect(),
            fdp_estimate: ratio,
            plus,
            q,
        },
        None => SelectionResult {
            threshold: f64::INFINITY,
            selected: Vec::new(),
            fdp_estimate: offset,
            plus,
            q,
        },
    })
}

/// Writes one row per feature (`index,w_value,selected`) after a `#` metadata
/// line echoing the threshold and level. `labels` overrides the 1-based index
/// column, e.g. with original column positions.
pub fn write_selection_csv<W: Write>(
    out: &mut W,
    w: &WVector,
    result: &SelectionResult,
    labels: Option<&[usize]>,
) -> Result<()> {
    writeln!(
        out,
        "# threshold={} q={} plus={} statistic={}",
        result.threshold, result.q, result.plus, w.kind
    )?;
    writeln!(out, "index,w_value,selected")?;
    let mut chosen = vec![false; w.len()];
    for &j in &result.selected {
        chosen[j] = true;
    }
    for (j, v) in w.w.iter().enumerate() {
        let label = labels.map_or(j + 1, |l| l[j]);
        writeln!(out, "{label},{v},{}", u8::from(chosen[j]))?;
    }
    Ok(())
}
