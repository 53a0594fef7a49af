//! Simulation of multi-RIS assisted MISO downlinks with imperfect CSI:
//! channel models, estimation protocols, deterministic SINR equivalents,
//! phase-shift optimization and Monte-Carlo validation.

pub mod channel;
pub mod detequiv;
pub mod error;
pub mod estimation;
pub mod experiment;
pub mod linalg;
pub mod montecarlo;
pub mod optimize;
pub mod precoding;
pub mod rng;
pub mod scenario;

pub use error::{Error, Result};
