// `!(a < b)` checks double as NaN rejection.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod alsac;
pub mod baselines;
pub mod bench;
pub mod env;
pub mod error;
pub mod nn;
pub mod prices;
pub mod rng;

pub use error::{Error, Result};
