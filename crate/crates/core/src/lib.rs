//! Characterize crowd-annotated benchmark datasets as measurement
//! instruments and evaluate system predictions with the instrument's
//! limits in view.

pub mod cli;
pub mod error;
pub mod evaluation;
pub mod instrument;
pub mod precision;
pub mod report;
pub mod reproducibility;
pub mod resolution;
pub mod stats;

pub use error::{Error, Result};
