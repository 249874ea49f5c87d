//! Reproducible sweeps over parent and uncle Hamiltonians with persisted,
//! machine-readable results.

pub mod config;
pub mod error;
pub mod record;
pub mod runs;
pub mod store;

pub use config::{Backend, ConfigOverrides, Experiment, ExperimentConfig, SizeRange, Tolerances};
pub use error::{CliError, Result};
pub use record::{Check, ResultRecord, RunDocument};
pub use runs::{run, run_cached};
pub use store::Store;

/// Exit status: everything ran and every check passed.
pub const EXIT_OK: i32 = 0;
/// Execution error.
pub const EXIT_ERROR: i32 = 1;
/// Some acceptance check failed.
pub const EXIT_CHECK_FAILED: i32 = 2;
