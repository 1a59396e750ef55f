//! File formats, dataset loaders, parallel execution and the experiment
//! drivers behind the `compcov` command-line tool.

pub mod cli;
mod error;
pub mod ingest;
pub mod io;
pub mod parallel;
pub mod reference;
pub mod sweep;
pub mod verify;

pub use error::{Error, Result};
