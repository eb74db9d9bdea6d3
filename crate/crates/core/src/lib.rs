//! Model-X-free knockoff filter for variable selection with false discovery
//! rate control in Gaussian linear regression.
//!
//! The pipeline is: [`construction`] builds knockoff copies of a normalized
//! design, [`lasso`] and [`statistics`] turn the augmented design and response
//! into antisymmetric scores `W`, and [`selection`] picks a data-dependent
//! threshold. [`baselines`] holds the comparison selectors (BHq variants and
//! the permutation construction), [`sequential`] the generic sequential
//! testing procedures, and [`sim`] the synthetic experiment harness and CSV
//! ingestion.

pub mod baselines;
pub mod construction;
pub mod error;
pub mod filter;
pub mod lasso;
pub mod linalg;
pub mod rng;
pub mod selection;
pub mod sequential;
pub mod sim;
pub mod statistics;

pub use error::{Error, Result};
