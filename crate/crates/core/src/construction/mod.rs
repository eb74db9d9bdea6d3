//! Knockoff construction: normalized designs, gap vectors, the knockoff
//! matrix itself, and the `p ≤ n < 2p` extensions.

mod design;
mod extend;
mod gap;
mod knockoffs;

pub use design::{normalize_design, DesignMatrix};
pub use extend::{duplicate_cycle_plan, residual_sigma, row_augment, CycleRound};
pub use gap::{
    equicorrelated_s, feasibility_margin, sdp_s, sdp_s_or_equicorrelated, sdp_s_with_report, GapKind, GapVector,
    SdpReport, FEASIBILITY_SLACK,
};
pub use knockoffs::{construct_knockoffs, construct_partial_knockoffs, AugmentedDesign};

/// Default tolerance for the SDP gap solver.
pub const DEFAULT_SDP_TOL: f64 = 1e-8;
