//! Scenario runner for `occlab-core`: configuration files, validation,
//! experiment pipelines with pass/fail gates, JSON / CSV reports and the
//! `occlab` command line.

pub mod cli;
pub mod config;
pub mod experiments;
pub mod geomcheck;
pub mod report;
pub mod scenarios;
pub mod validate;

pub use config::{load, parse_scenario, ScenarioConfig};
pub use experiments::{run_scenario, RunError, RunOutput};
pub use report::RunReport;
