//! Monte Carlo experiments over batches of simulated paths, their artifacts
//! and the command-line front end.

pub mod cli;
pub mod config;
pub mod covariance;
pub mod diagnostics;
pub mod identity;
pub mod io;
pub mod isometry;
mod runner;
pub mod sweep;

pub use config::{parse_eps_ladder, parse_model_param, ConfigFile, ExperimentConfig, DEFAULT_EPS_LADDER};
pub use covariance::{run_covariance_validation, CovarianceReport};
pub use diagnostics::{run_assumption_diagnostics, DiagnosticsReport};
pub use identity::{run_identity_experiment, run_wiener_experiment, IdentityRun, SummaryStats};
pub use isometry::{run_isometry_expansion, IsometryReport};
pub use runner::{ensure_finite, run_paths};
pub use sweep::{run_refinement_sweep, SweepReport};

/// Version string echoed in every JSON artifact.
pub const VERSION: &str = concat!("v", env!("CARGO_PKG_VERSION"));
