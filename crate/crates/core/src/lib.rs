//! Simulator and trainer for orchestrating emulator-assisted fine-tuning at
//! the mobile edge: each step, every UE either ships its data to the server
//! or tunes locally on a cached (possibly re-downloaded) emulator whose size
//! is a continuous retention fraction.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baselines;
pub mod env;
pub mod error;
pub mod harness;
pub mod hmppo;
pub mod nn;
pub mod sysmodel;

pub use error::{Error, Result};
