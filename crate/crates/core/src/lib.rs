//! Group testing over populations with overlapping community structure.
//!
//! The crate covers structure generation and decomposition, infection
//! models, pooled-test simulation with Z-channel noise, lower bounds,
//! adaptive and non-adaptive algorithms, a belief-propagation decoder, the
//! closed-form error formulas, and a seeded experiment harness.

pub mod adaptive;
pub mod analysis;
pub mod bounds;
pub mod error;
pub mod harness;
pub mod infection;
pub mod lbp;
pub mod nonadaptive;
pub mod seed;
pub mod structure;
pub mod testing;

pub use error::{Error, Result};
pub use infection::{InfectionParamsII, InfectionState};
pub use structure::CommunityStructure;
pub use testing::{TestDesign, TestOracle, TestOutcomes};
