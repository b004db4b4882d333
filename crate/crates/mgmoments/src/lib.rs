//! File formats, parallel drivers and the command line for `mgmoments-core`.

pub mod cli;
mod error;
pub mod io;
pub mod parallel;

pub use error::{Error, Result};
