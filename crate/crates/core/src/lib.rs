//! Equal-order hybridized discontinuous Galerkin discretization of the 2D Oseen
//! problem on the unit square, covering the HDG, E-HDG and EDG trace spaces.
//!
//! The crate is `no_std` and only needs `alloc`; file IO, sparse factorization
//! and the command line live in the `oseen` companion crate.
#![no_std]
extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod error;
pub mod mesh;
pub mod refspace;
pub mod sparse;
pub mod spaces;
pub mod projection;
pub mod forms;
pub mod analysis;
pub mod linsys;

pub use error::{Error, Result};
