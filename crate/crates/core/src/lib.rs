//! Numerical laboratory for the Neumann Laplacian on thin tubular
//! neighbourhoods of curves on surfaces.
//!
//! The strip is pulled back to the rectangle `[0, L] x [-1, 1]` in Fermi
//! coordinates, where its metric is `diag(f^2, eps^2)`:
//!
//! * [`geometry`] integrates the Jacobi equation for `f` and evaluates the
//!   explicit bounds on it;
//! * [`operator`] assembles the Neumann forms with bilinear elements;
//! * [`eigen`] computes the lowest eigenpairs and the resolvent-difference norm;
//! * [`analysis`] locates extrema of eigenfunctions and fits convergence rates;
//! * [`cli`] wires everything behind a JSON configuration.

// `!(x < y)` deliberately treats NaN as failing the check
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod cli;
pub mod config;
pub mod eigen;
pub mod error;
pub mod fit;
pub mod geometry;
pub mod grid;
pub mod operator;
pub mod serde_ext;
pub mod sparse;
pub mod spline;

pub use error::{Error, Result};
pub use grid::GridSpec;
