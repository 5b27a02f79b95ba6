//! Scenario ingestion, subcommand runners, and data emission for the
//! unicycle motion toolkit.

pub mod emit;
pub mod error;
pub mod report;
pub mod runner;
pub mod scenario;

pub use error::CliError;
pub use scenario::{load_scenario, Scenario};
