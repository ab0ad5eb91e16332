//! Fast direct solver for Nyström-discretized second-kind boundary integral
//! equations on closed planar contours.
//!
//! The pipeline is: build a contour and quadrature grid, compress the
//! system matrix into hierarchically block-separable (HBS) form, invert it
//! recursively, and apply the inverse in linear time.

pub mod compression;
pub mod diagnostics;
pub mod error;
pub mod geometry;
pub mod hbs;
pub mod invert;
pub mod io;
pub mod linalg;
pub mod quadrature;
pub mod tree;
pub mod workflow;

pub use error::{Error, Result};
