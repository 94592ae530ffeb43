//! Multi-participant multi-view federated learning with sparse feature
//! selection under vertically partitioned data.
//!
//! Each participant holds a different feature view of the same samples; one
//! of them also holds the labels. Participants learn sparse transformation
//! matrices locally and agree on a shared pseudo-label matrix through a
//! coordinator, without ever sending features or labels.

pub mod baselines;
pub mod cli;
pub mod data;
pub mod error;
pub mod eval;
pub mod featsel;
pub mod federation;
pub mod numerics;
pub mod optimizer;

pub use error::{Error, Result};
