//! Numerical study of the first Dirichlet eigenfunction of the Laplacian on
//! planar convex domains: eigenpair solvers, a one-dimensional comparison
//! operator, first-mode decomposition, level-set geometry and derivative
//! diagnostics near the maximum, and the checks that tie them together.

pub mod campaign;
pub mod derivatives;
pub mod domain;
pub mod error;
pub mod families;
pub mod geometry;
pub mod grid;
pub mod interp;
pub mod levelset;
pub mod lu;
pub mod modes;
pub mod ode;
pub mod pde;
pub mod snapshot;
pub mod verification;

pub use error::{Error, Result};
