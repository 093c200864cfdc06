//! Nonlocal vector calculus: kernels, nonlocal gradient/divergence/Laplacian operators,
//! their fractional specializations, and a Galerkin solver for nonlocal diffusion.

pub mod cli;
pub mod constants;
pub mod equivalence;
pub mod error;
pub mod fields;
pub mod geometry;
pub mod identities;
pub mod kernels;
pub mod operators;
pub mod quadrature;
pub mod solver;

pub use error::{Error, Result};
pub use geometry::Point;
