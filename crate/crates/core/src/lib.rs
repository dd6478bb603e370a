//! Simulation and numerical certification of networked heterogeneous
//! nonlinear negative-imaginary systems.
//!
//! The crate assembles graph-based positive-feedback consensus loops of
//! nonlinear NI plants and OSNI edge controllers, integrates the closed-loop
//! dynamics, and certifies the dissipation inequalities, steady-state sign
//! conditions, and storage-function positivity that back the consensus
//! guarantee, by seeded sampling and falsification rather than proof.
//!
//! The numerical core is generic over the scalar type ([`scalar::Real`],
//! implemented for `f32` and `f64`); the aliases at the crate root fix the
//! `f64` instantiations that the CLI and the bundled scenarios use.

// `!(x > 0)` guards reject NaN parameters along with nonpositive ones.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod catalog;
pub mod certify;
pub mod error;
pub mod graph;
pub mod linalg;
pub mod network;
pub mod scalar;
pub mod signal;
pub mod sim;
pub mod system;
pub mod trajectory;

pub use error::{Error, Result};
pub use scalar::Real;

/// `f64` instantiations of the core types.
pub type SystemModel64 = system::SystemModel<f64>;
pub type StorageFunction64 = system::StorageFunction<f64>;
pub type TestSignal64 = signal::TestSignal<f64>;
pub type Trajectory64 = trajectory::Trajectory<f64>;
pub type Mat64 = linalg::Mat<f64>;
pub type CatalogEntry64 = catalog::CatalogEntry<f64>;
pub type PlantBank64 = network::PlantBank<f64>;
pub type ControllerBank64 = network::ControllerBank<f64>;
pub type ControllerUnit64 = network::ControllerUnit<f64>;
pub type NetworkAssembly64 = network::NetworkAssembly<f64>;
pub type SingleLoop64 = network::SingleLoop<f64>;
pub type IntegratorConfig64 = sim::IntegratorConfig<f64>;
pub type CertReport64 = certify::CertReport<f64>;
