//! Time-optimal control of a driven, dissipative two-level system.

pub mod error;
pub mod experiments;
pub mod geometry;
pub mod io;
pub mod model;
pub mod optimize;
pub mod pmp;
pub mod propagate;

pub use error::{Error, Result};
