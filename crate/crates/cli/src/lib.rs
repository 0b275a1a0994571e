//! Scenario loading, the `simulate` / `analyze` / `sweep` commands and
//! their file formats.

pub mod commands;
pub mod error;
pub mod scenario;
pub mod sweep;

pub use commands::{cmd_analyze, cmd_simulate, AnalysisOutput, SimulationSummary};
pub use error::{exit_code, CliError, Result};
pub use scenario::{load_scenario, parse_scenario, Scenario};
pub use sweep::{cmd_sweep, load_sweep, parse_sweep, SweepSpec};

/// Shortest round-trip decimal form; exponent notation outside
/// `[1e-4, 1e15)` so tiny residuals do not print as long zero runs.
pub fn fmt_f64(v: f64) -> String {
    let a = v.abs();
    if a == 0.0 || (1e-4..1e15).contains(&a) || !v.is_finite() {
        v.to_string()
    } else {
        format!("{v:e}")
    }
}
