//! Numerical toolkit for the fractional p-Laplacian on the hyperboloid model
//! of hyperbolic space.
//!
//! The operator is evaluated through three equivalent routes: the heat
//! semigroup, a singular radial kernel built from modified Bessel functions,
//! and the trace of a degenerate elliptic extension problem. All normalizing
//! constants are computed exactly from Gamma-function expressions, which makes
//! the s -> 1 limit to the classical p-Laplacian numerically observable.

pub mod error;
pub mod quad;
pub mod specfun;
pub mod geometry;
pub mod termcalc;
pub mod heat;
pub mod kernels;
pub mod operator;
pub mod limits;
pub mod verify;

pub use error::{Error, Result};
pub use geometry::{GridSpec, HyperPoint, PolarGrid, TangentVector};
