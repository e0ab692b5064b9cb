//! File formats, parallel execution and the `tactdiff` command-line
//! pipeline on top of `tactdiff-core`.

pub mod cli;
pub mod controlset;
pub mod corpus;
pub mod error;
pub mod exec;
pub mod io;
pub mod model;

pub use error::{CliError, Result};
