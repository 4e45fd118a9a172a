//! File formats, experiment running and the `histnorm` command-line tool
//! on top of [`histnorm_core`].

pub mod cli;
mod error;
pub mod io;
pub mod modelfile;
pub mod report;
pub mod runner;

pub use error::{Error, FormatError, Result};
pub use histnorm_core as core;
