//! Run configuration, named presets and drivers for full runs.
pub mod config;
pub mod convergence;
pub mod presets;
pub mod runner;

pub use config::{ConvergenceConfig, FitConfig, OutputConfig, ScenarioConfig};
pub use convergence::{run_convergence, ConvergencePoint, ConvergenceReport};
pub use presets::{preset_defaults, Preset, Profile};
pub use runner::{run, RunOutcome, RunReport, Simulation};
