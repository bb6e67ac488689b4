//! Backward retrieval in field-controlled optical quantum memories.
//!
//! The crate covers the closed-form timing and efficiency relations of the
//! reversal protocol, the design of periodic electrode (or wire) arrays
//! producing a linear frequency-shift profile, optimization of their
//! potentials, and two direct simulations: a phased-array model of the
//! stored ensemble and a 1D linear storage/retrieval propagation model.

pub mod ensemble;
pub mod error;
pub mod field;
pub mod materials;
pub mod optimizer;
pub mod oracle;
pub mod propagation;
pub mod protocol;
pub mod reproduce;

pub use error::{Error, Result};

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;
