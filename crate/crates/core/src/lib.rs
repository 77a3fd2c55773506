//! Simulation of a lithium-niobate quantum relay chip: photon-pair sources,
//! electro-optic couplers, two-photon interference at the Bell-measurement
//! coupler, a Monte Carlo model of the three-fold coincidence bench and the
//! key-rate budget of relayed fibre links.

pub mod components;
pub mod config;
pub mod error;
pub mod interference;
pub mod link;
pub mod montecarlo;
pub mod report;
pub mod statistics;
pub mod units;

pub use config::{preset, ScenarioConfig};
pub use error::{Error, Result};
pub use montecarlo::Scenario;
