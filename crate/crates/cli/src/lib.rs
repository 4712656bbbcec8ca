//! Scenario sweeps for squeezed-light interferometers: JSON configuration,
//! row evaluation through the analytic engine and the Fock oracle, and CSV
//! output.

pub mod config;
pub mod output;
pub mod scenario;

pub use config::{load, ConfigError, LoadedConfig, ScenarioConfig};
pub use scenario::{run_scenario, Row, SensitivityReport};

/// Environment variable capping the number of worker threads.
pub const THREADS_ENV: &str = "SQUEEZELAB_THREADS";

/// Parses a thread cap; empty means no cap.
pub fn parse_threads(value: &str) -> Result<Option<usize>, String> {
    let v = value.trim();
    if v.is_empty() {
        return Ok(None);
    }
    match v.parse::<usize>() {
        Ok(n) if n >= 1 => Ok(Some(n)),
        _ => Err(format!("{THREADS_ENV} must be a positive integer, got `{value}`")),
    }
}
