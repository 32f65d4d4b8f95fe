//! Weak cross-Kerr (qubus) photonic logic: exact hybrid simulation of
//! controlled-path and merging gates, composite multi-control constructions,
//! a cosine-sine based unitary compiler and resource accounting.

pub mod compile;
pub mod composites;
pub mod csd;
pub mod detectors;
pub mod error;
pub mod formulas;
pub mod gates;
pub mod matrix;
pub mod optics;
pub mod parallel;
pub mod program;
pub mod simulate;
pub mod state;
pub mod tally;

pub use error::{Error, Result};
pub use num_complex::Complex64;
