//! Petz recovery maps and tabletop time reversal for finite-dimensional
//! quantum channels.

pub mod channelcore;
pub mod cli;
pub mod collision;
pub mod error;
pub mod examples;
pub mod feasibility;
pub mod matrixkit;
pub mod petz_ttr;
pub mod random;
pub mod ttr_approx;

pub use error::{Error, Result};
