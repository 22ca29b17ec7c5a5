//! Cascaded channel estimation for RIS-aided mmWave multi-user MIMO links with
//! hybrid analog/digital front-ends.
//!
//! The crate is organised bottom-up:
//!
//! * [`geometry`] builds steering vectors, DFT matrices and the RIS angle dictionary.
//! * [`channel`] samples geometric channels and forms cascaded (sub)channels.
//! * [`protocol`] simulates the uplink pilot measurements of every stage.
//! * [`solvers`] holds OMP, least squares and the angle searches.
//! * [`design`] constructs combiners and RIS phase matrices.
//! * [`estimator`] runs the three-stage estimator (and its oracle variant).
//! * [`metrics`] computes NMSE, noise levels and pilot-overhead budgets.
//! * [`harness`] runs Monte-Carlo experiments and writes CSV results.

pub mod channel;
pub mod design;
pub mod error;
pub mod estimator;
pub mod geometry;
pub mod harness;
pub mod linalg;
pub mod metrics;
pub mod protocol;
pub mod rng;
pub mod solvers;

pub use error::{Error, Result};

/// Complex scalar used throughout the crate.
pub type C64 = num_complex::Complex64;
/// Dense complex matrix (column-major).
pub type CMat = nalgebra::DMatrix<C64>;
/// Dense complex column vector.
pub type CVec = nalgebra::DVector<C64>;
