//! Configuration-driven experiment runner for `nls-core`.
//!
//! A TOML file selects a preset and mesh; [`run_experiment`] executes one
//! mode and leaves a run directory with a manifest, CSV artifacts and plot
//! data.

pub mod config;
pub mod error;
pub mod plot;
pub mod run;

pub use config::{load_config, parse_config, ExperimentConfig, Mode, Preset};
pub use error::{CliError, Stage};
pub use plot::{available_series, emit_plotdata};
pub use run::{config_from_manifest, run_experiment, Check, Manifest, RunOutcome};
