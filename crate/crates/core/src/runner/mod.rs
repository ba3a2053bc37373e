//! Configuration, time-loop orchestration, CSV output, parameter sweeps and
//! the acceptance suite.

pub mod acceptance;
pub mod config;
pub mod csv;
pub mod run;
pub mod scenarios;
pub mod sweep;

pub use config::{CheckKind, ConfigError, FitSpec, RunConfig};
pub use csv::DiagnosticsRow;
pub use run::{run, CheckResult, FitResult, RunError, RunOutput, StepSample};
pub use sweep::{sweep_mu, SweepRow};
