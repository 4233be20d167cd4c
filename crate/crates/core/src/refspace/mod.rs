//! Reference-element machinery: Lagrange bases and quadrature.

mod basis;
mod quadrature;

pub use basis::*;
pub use quadrature::*;
