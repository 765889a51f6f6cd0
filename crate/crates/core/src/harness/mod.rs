//! Scenario runner: wind, the closed-loop simulation, telemetry and the live
//! session protocol.

pub mod api;
pub mod scenario;
pub mod session;
pub mod sim;
pub mod telemetry;
pub mod wind;

pub use scenario::{preset, GainsSpec, Scenario, PRESET_NAMES};
pub use sim::{run_scenario, RunOutput, Simulation};
pub use telemetry::{rmse, write_csv, RmseReport, TelemetryRecord};
pub use wind::{WindModel, WindSpec};
