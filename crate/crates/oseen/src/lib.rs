//! Companion to `oseen-core`: sparse direct solves, the manufactured test case,
//! convergence studies and sweeps, CSV/JSON/TOML formats and debugging dumps.

pub mod config;
pub mod dump;
pub mod error;
pub mod manufactured;
pub mod output;
pub mod solver;
pub mod study;

pub use error::{StudyError, StudyResult};
pub use oseen_core;
