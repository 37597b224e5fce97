//! Config-driven experiments on top of `nls_core`: ground states, evolution
//! runs, blow-up certificates for scaled ground states, the property suite
//! and parameter sweeps. Each run leaves a self-describing output directory.

// `!(x > 0.0)` is the NaN-rejecting form of a positivity check
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod error;
pub mod run;
pub mod verify;

pub use config::{Command, ExperimentConfig};
pub use error::{LabError, Result};
pub use run::{run, Outcome};
