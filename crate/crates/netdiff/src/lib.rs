//! File formats, data ingestion, parallel Monte Carlo execution and the
//! command line for `netdiff-core`.

pub mod cli;
pub mod error;
pub mod ingest;
pub mod io;
pub mod runner;

pub use error::{Error, Result};
