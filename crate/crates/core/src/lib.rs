//! Simulation and circuit-compilation toolkit for the quartic SYK model.

pub mod error;
pub mod linalg;
pub mod pauli;
pub mod rng;
pub mod syk;
pub mod clustering;
pub mod circuit;
pub mod sim;
pub mod synth;
pub mod mitigation;
pub mod observables;

pub use error::{Error, Result};
