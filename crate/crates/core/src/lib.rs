//! Sequential least-squares finite elements for Stokes flow on
//! patch-reconstructed approximation spaces.

pub mod analysis;
pub mod assembly;
pub mod error;
pub mod fixtures;
pub mod harness;
pub mod locate;
pub mod lstsq;
pub mod mesh;
pub mod output;
pub mod patch;
pub mod poly;
pub mod problems;
pub mod quadrature;
pub mod reconstruction;
pub mod sparse;

pub use error::{Error, Result};
