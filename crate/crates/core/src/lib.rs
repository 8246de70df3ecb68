//! Rounding and verification tools for the Max-3-Section semidefinite relaxation.

pub mod certifier;
pub mod config;
pub mod cutratio;
pub mod error;
pub mod gaussian;
pub mod instances;
pub mod kestimate;
pub mod rounding;

pub use config::{Configuration, PairJoint, Realization, Symmetry};
pub use error::{Error, Result};
