// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod ensemble;
pub mod error;
pub mod fockspace;
pub mod noise;
pub mod optim;
pub mod phaseprep;
pub mod projection;
pub mod sme;
pub mod states;
pub mod wigner;

pub use error::{Error, ParamIssue, Result};
