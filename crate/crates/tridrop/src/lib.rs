//! Files, datasets, reports and experiment pipelines for Triangular Dropout.
//!
//! The numeric engine lives in `tridrop_core`; this crate adds what needs
//! `std`: the IDX reader for MNIST, the `TDRP` model file, JSON settings, CSV
//! reports, and the pipelines driven by the `tridrop` binary.

pub mod config;
pub mod error;
pub mod experiments;
pub mod idx;
pub mod model_file;
pub mod report;

pub use error::{CliError, Result};
pub use model_file::{load_model, save_model};
pub use report::{AblationReport, AblationRow, Metric};
