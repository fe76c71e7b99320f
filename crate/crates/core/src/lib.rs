//! Placement, evaluation and continuum analysis for networks of similarity
//! caches.

pub mod continuum;
pub mod error;
pub mod model;
pub mod offline;
pub mod online;
pub mod scalar;
pub mod scenarios;
pub mod toy;
pub mod workload;

pub use error::{Error, Result};
pub use scalar::{Exact, Scalar};
