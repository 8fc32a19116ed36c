//! Fractional variational calculus on uniform grids: Riemann-Liouville,
//! Caputo and Riesz-Caputo operators, integer-order expansions, Euler-Lagrange
//! residuals, a direct-method solver and weak-convergence checks.

pub mod chebyshev;
pub mod error;
pub mod euler_lagrange;
pub mod expansion;
pub mod gamma;
pub mod grid;
pub mod lagrangian;
pub mod lbfgs;
pub mod operators;
pub mod solver;
pub mod weak;

pub use error::{FracError, Result};
pub use grid::{EndSingularity, EndpointMask, FractionalOrder, GridFunction, GridShape, MemoryWindow, Side};
pub use lagrangian::Lagrangian;
pub use operators::DerivativeKind;
