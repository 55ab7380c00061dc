//! Dynamic MEV extraction-rate mechanism.
//!
//! The protocol adjusts the share `λ` of MEV paid to miners so that the
//! ratio of active miners to active users tracks a target `w`. This crate
//! simulates the update maps, computes closed-form stability bounds and
//! searches for periodic orbits and chaos witnesses.
//!
//! Grid scans run on rayon when the `parallel` feature is enabled (the
//! default); pass [`Execution::Sequential`] or build without the feature to
//! stay on the calling thread. Results do not depend on the mode.

#![allow(clippy::neg_cmp_op_on_partial_ord)] // `!(x > 0.0)` also rejects NaN

pub mod analysis;
pub mod distributions;
pub mod dynamics;
pub mod error;
pub mod exec;
pub mod orbits;
pub mod rng;
pub mod scenarios;
mod special;
#[cfg(test)]
mod testkit;

pub use analysis::{Deviation, ThresholdReport};
pub use distributions::ToleranceDistribution;
pub use dynamics::{BurnPolicy, MarketInstance, MevSequence, OrbitTrace, UpdateRule};
pub use error::{Error, Result};
pub use exec::Execution;
pub use orbits::{ChaosWitness, PeriodReport, ScanFamily, ScanSpec, ScanTable};
pub use scenarios::{RegimeConfig, ScenarioResult, StressConfig};
