//! Energy-minimization solver for 2D linear elasticity on multi-material
//! domains, using Kolmogorov-Arnold networks as the displacement ansatz.

pub mod autodiff;
pub mod baseline;
pub mod bspline;
pub mod checkpoint;
pub mod config;
pub mod dem;
pub mod elasticity;
pub mod error;
pub mod geometry;
pub mod kan;
pub mod metrics;
pub mod optimize;
pub mod problems;

pub use error::{PikanError, Result};
