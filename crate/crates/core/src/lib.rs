//! Iterative pruning laboratory.
//!
//! A small, fully deterministic toolkit for studying learning-rate schedules
//! under iterative network pruning: dense matrix numerics, dataset loaders,
//! an explicit-backprop masked MLP, six learning-rate schedules including the
//! S-shaped SILO schedule, pruning scorers and the prune/freeze/retrain
//! driver, closed-form activation-energy bounds with Monte-Carlo checks, and
//! an experiment harness with a CLI.

pub mod data;
pub mod error;
pub mod harness;
pub mod nn;
pub mod numerics;
pub mod pruning;
pub mod schedules;
pub mod theory;

pub use error::{Error, Result};
