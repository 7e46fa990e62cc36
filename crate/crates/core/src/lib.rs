//! Coverage-based privacy analysis of output-perturbed logistic regression.
//!
//! The pipeline goes: load and normalize a table ([`data`]), train the
//! regularized model ([`erm`]), bound every single-row-removal neighbor and
//! pick its worst-case model point ([`neighbors`]), draw from the
//! Laplace-norm mechanism ([`mechanism`]), score privacy loss at a model
//! point ([`coverage`]) and sweep it over a range of ε ([`sweep`]).

pub mod cli;
pub mod coverage;
pub mod data;
pub mod erm;
pub mod error;
pub mod mechanism;
pub mod neighbors;
pub mod plot;
pub mod stats;
pub mod sweep;

#[cfg(test)]
pub(crate) mod test_support;

pub use error::{Error, Result};
