//! Scenario runner for molecular communication network experiments:
//! configuration parsing, sweep expansion, seeded execution, CSV emission,
//! and run manifests. The `mcn-sim` binary is a thin wrapper over this
//! library; the integration suites drive it directly.

pub mod config;
pub mod manifest;
pub mod scenario;

pub use config::{parse_config, Kind, ScenarioConfig};
pub use manifest::RunManifest;
pub use scenario::{run_scenario, RunArtifacts, RunError};
