//! Configuration, initial data, the Mach-parameter sweep and its outputs.

pub mod config;
pub mod initial;
pub mod output;
pub mod plot;
pub mod sweep;

pub use config::{load_config, Config};
pub use initial::well_prepared_initial_data;
pub use output::emit_outputs;
pub use sweep::{fit_convergence_order, run_sweep, SweepRecord, SweepResult};
