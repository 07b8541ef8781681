//! Soft coordination of PV inverters and an LDC-controlled on-load tap changer.

// `!(x > 0.0)` style checks are intended: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baselines;
pub mod cli;
pub mod env;
pub mod error;
pub mod grid;
pub mod nn;
pub mod oltc;
pub mod rng;
pub mod rsac;
pub mod scenario;

pub use error::{Error, Result};
