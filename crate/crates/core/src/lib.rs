//! Movable-antenna placement for multiuser MISO downlinks.
//!
//! Antenna positions are chosen from a cell-specific angular power spectrum
//! by maximizing the asymptotic decorrelated channel power gain of the
//! channel covariance, which amounts to balancing its eigenvalues. Layouts
//! are then compared by Monte-Carlo simulation of ZF precoding.

pub mod angular;
pub mod asymptotic;
pub mod cebap;
pub mod channel;
mod error;
pub mod montecarlo;
pub mod precoding;
pub mod vmf;

pub use error::{Error, Result};
pub use num_complex::Complex64;

/// Complex dense matrix used for channels and covariances.
pub type CMatrix = nalgebra::DMatrix<Complex64>;
