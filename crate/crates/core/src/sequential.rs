//! Sequential FDR procedures over an ordered list of p-values, the one-bit
//! encoding that maps knockoff statistics onto them, and the binomial
//! expectation behind their stopping-time bound.

use std::fmt;
use std::str::FromStr;

use twofloat::TwoFloat;

use crate::error::{check_level, Error, Result};
use crate::selection::magnitudes_differ;
use crate::statistics::WVector;

/// Ordered p-values with admissible stopping points `K` (prefix lengths in
/// `1..=m`) and cutoff `c`.
#[derive(Debug, Clone, PartialEq)]
pub struct PValueSequence {
    p: Vec<f64>,
    stops: Vec<usize>,
    c: f64,
}

impl PValueSequence {
    pub fn new(p: Vec<f64>, mut stops: Vec<usize>, c: f64) -> Result<Self> {
        if !(c > 0.0 && c < 1.0) {
            return Err(Error::InvalidArgument(format!("cutoff c must lie in (0, 1), got {c}")));
        }
        if let Some(v) = p.iter().find(|&&v| !(v > 0.0 && v <= 1.0)) {
            return Err(Error::InvalidArgument(format!("p-value {v} outside (0, 1]")));
        }
        stops.sort_unstable();
        stops.dedup();
        let m = p.len();
        if stops.iter().any(|&k| k == 0 || k > m) {
            return Err(Error::InvalidArgument(format!("stopping points must lie in 1..={m}")));
        }
        if m > 0 && stops.is_empty() {
            return Err(Error::InvalidArgument("stopping set K is empty".into()));
        }
        Ok(PValueSequence { p, stops, c })
    }

    /// Sequence with every prefix admissible.
    pub fn with_all_stops(p: Vec<f64>, c: f64) -> Result<Self> {
        let m = p.len();
        Self::new(p, (1..=m).collect(), c)
    }

    pub fn p(&self) -> &[f64] {
        &self.p
    }

    pub fn stops(&self) -> &[usize] {
        &self.stops
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn len(&self) -> usize {
        self.p.len()
    }

    pub fn is_empty(&self) -> bool {
        self.p.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SequentialVariant {
    Fstp0,
    Fstp1,
    Sstp0,
    Sstp1,
}

impl SequentialVariant {
    pub fn plus(self) -> bool {
        matches!(self, SequentialVariant::Fstp1 | SequentialVariant::Sstp1)
    }

    pub fn name(self) -> &'static str {
        match self {
            SequentialVariant::Fstp0 => "fstp0",
            SequentialVariant::Fstp1 => "fstp1",
            SequentialVariant::Sstp0 => "sstp0",
            SequentialVariant::Sstp1 => "sstp1",
        }
    }
}

impl fmt::Display for SequentialVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SequentialVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fstp0" => Ok(SequentialVariant::Fstp0),
            "fstp1" => Ok(SequentialVariant::Fstp1),
            "sstp0" => Ok(SequentialVariant::Sstp0),
            "sstp1" => Ok(SequentialVariant::Sstp1),
            other => Err(Error::InvalidArgument(format!("unknown variant '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SequentialResult {
    /// Stopping point; 0 when no admissible `k` qualifies.
    pub k_hat: usize,
    /// Rejected positions (0-based, ascending).
    pub rejected: Vec<usize>,
    pub variant: SequentialVariant,
}

/// Prefix counts of p-values above the cutoff; `above[k]` covers `p_1..p_k`.
fn prefix_above(seq: &PValueSequence) -> Vec<usize> {
    let mut above = Vec::with_capacity(seq.len() + 1);
    above.push(0);
    for &v in &seq.p {
        above.push(above.last().unwrap() + usize::from(v > seq.c));
    }
    above
}

/// First sequential procedure: largest `k ∈ K` with
/// `(offset + #{j ≤ k : p_j > c}) / (offset + k) ≤ (1 - c) q`, the 0-variant
/// using `max(k, 1)` in the denominator. Rejects the first `k̂` hypotheses.
pub fn fstp(seq: &PValueSequence, q: f64, plus: bool) -> Result<SequentialResult> {
    check_level(q)?;
    let above = prefix_above(seq);
    let offset = f64::from(u8::from(plus));
    let bound = (1.0 - seq.c) * q;
    let k_hat = seq
        .stops
        .iter()
        .rev()
        .copied()
        .find(|&k| {
            let denom = if plus { 1.0 + k as f64 } else { k.max(1) as f64 };
            (offset + above[k] as f64) / denom <= bound
        })
        .unwrap_or(0);
    Ok(SequentialResult {
        k_hat,
        rejected: (0..k_hat).collect(),
        variant: if plus {
            SequentialVariant::Fstp1
        } else {
            SequentialVariant::Fstp0
        },
    })
}

/// Second sequential procedure: largest `k ∈ K` with
/// `(offset + #{j ≤ k : p_j > c}) / max(#{j ≤ k : p_j ≤ c}, 1) ≤ (1 - c) q / c`.
/// Rejects the positions up to `k̂` whose p-value is at most `c`.
pub fn sstp(seq: &PValueSequence, q: f64, plus: bool) -> Result<SequentialResult> {
    check_level(q)?;
    let above = prefix_above(seq);
    let offset = f64::from(u8::from(plus));
    let bound = (1.0 - seq.c) / seq.c * q;
    let k_hat = seq
        .stops
        .iter()
        .rev()
        .copied()
        .find(|&k| {
            let below = k - above[k];
            (offset + above[k] as f64) / below.max(1) as f64 <= bound
        })
        .unwrap_or(0);
    Ok(SequentialResult {
        k_hat,
        rejected: (0..k_hat).filter(|&j| seq.p[j] <= seq.c).collect(),
        variant: if plus {
            SequentialVariant::Sstp1
        } else {
            SequentialVariant::Sstp0
        },
    })
}

pub fn run_variant(seq: &PValueSequence, q: f64, variant: SequentialVariant) -> Result<SequentialResult> {
    match variant {
        SequentialVariant::Fstp0 | SequentialVariant::Fstp1 => fstp(seq, q, variant.plus()),
        SequentialVariant::Sstp0 | SequentialVariant::Sstp1 => sstp(seq, q, variant.plus()),
    }
}

/// One-bit p-values built from `W`, and the original feature index at each
/// position of the sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct OneBitReduction {
    pub seq: PValueSequence,
    pub order: Vec<usize>,
}

impl OneBitReduction {
    /// Maps rejected positions back to feature indices (ascending).
    pub fn features(&self, result: &SequentialResult) -> Vec<usize> {
        let mut out: Vec<usize> = result.rejected.iter().map(|&pos| self.order[pos]).collect();
        out.sort_unstable();
        out
    }
}

/// Drops zero entries, orders the rest by decreasing `|W|` (ties by
/// ascending index), and sets `p = 1/2` for positive and `p = 1` for negative
/// entries. Stopping points are the positions followed by a strict decrease in
/// `|W|`, plus the last position; `c = 1/2`.
pub fn one_bit_reduction(w: &WVector) -> OneBitReduction {
    let mut order: Vec<usize> = (0..w.len()).filter(|&j| w.w[j] != 0.0).collect();
    order.sort_by(|&a, &b| w.w[b].abs().total_cmp(&w.w[a].abs()).then(a.cmp(&b)));
    let m = order.len();
    let p = order.iter().map(|&j| if w.w[j] > 0.0 { 0.5 } else { 1.0 }).collect();
    let stops = (1..=m)
        .filter(|&k| k == m || magnitudes_differ(w.w[order[k - 1]].abs(), w.w[order[k]].abs()))
        .collect();
    OneBitReduction {
        seq: PValueSequence::new(p, stops, 0.5).expect("one-bit sequence is valid by construction"),
        order,
    }
}

fn binomial_coefficient(n: u64, k: u64) -> u128 {
    let k = k.min(n - k);
    (0..k).fold(1u128, |acc, i| acc * u128::from(n - i) / u128::from(i + 1))
}

/// Exact `E[Y / (1 + N - Y)]` for `Y ~ Binomial(N, c)`, by enumeration.
///
/// Binomial coefficients are exact integers; terms and their sum are carried
/// in double-double precision and rounded once at the end.
pub fn binomial_ratio_expectation(n: usize, c: f64) -> Result<f64> {
    if n > 60 {
        return Err(Error::Overflow(n));
    }
    if !(c > 0.0 && c < 1.0) {
        return Err(Error::InvalidArgument(format!("c must lie in (0, 1), got {c}")));
    }
    let nn = n as u64;
    let c2 = TwoFloat::from(c);
    let rest = TwoFloat::new_sub(1.0, c);
    let mut sum = TwoFloat::from(0.0);
    for i in 1..=nn {
        let prob = TwoFloat::from(binomial_coefficient(nn, i)) * c2.powi(i as i32) * rest.powi((nn - i) as i32);
        sum += prob * (i as f64) / ((1 + nn - i) as f64);
    }
    Ok(f64::from(sum))
}
