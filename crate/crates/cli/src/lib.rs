//! Batch front-end for networked negative-imaginary consensus scenarios:
//! parse a TOML scenario, certify the dissipativity hypotheses, integrate the
//! closed loop, and emit CSV trajectories plus a certification report.

pub mod artifacts;
pub mod runner;
pub mod scenario;

/// The bundled three-plant consensus scenario (cubic integrator plants with
/// gains 1, 3, 2 on a three-node path, two cubic damped edge controllers,
/// initial outputs 30, 2, −8).
pub const PAPER_FIG7_SCENARIO: &str = include_str!("../scenarios/paper_fig7.toml");

pub use runner::{execute, Mode, RunFailure, RunSummary};
pub use scenario::Scenario;
