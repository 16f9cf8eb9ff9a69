//! Configuration, experiment runner and plotting behind the `qndsim` tool.

// `!(a > b)` also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod error;
pub mod plot;
pub mod run;

pub use config::{Experiment, RunConfig};
pub use error::CliError;
pub use run::{run, RunOutcome};
