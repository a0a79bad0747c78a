//! Finite models of wave propagation and the lattice-theoretic machinery used
//! to recover a metric space from boundary measurements.

pub mod align;
pub mod bcinverse;
pub mod checks;
pub mod error;
pub mod finmetric;
pub mod greensys;
pub mod hilbertlat;
pub mod io;
pub mod latticekit;
pub mod quad;
pub mod template;
pub mod wavedyn;
pub mod wavespectrum;

pub use error::{Error, Result};
