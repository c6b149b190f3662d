//! File formats, checkpoints and the command-line front end for
//! [`neuncut_core`].
//!
//! * [`io`]: points CSV, labels files, atomic writes
//! * [`model_file`]: versioned model JSON
//! * [`report`]: training-curve, gamma-search and scatter CSVs
//! * [`cli`]: the `neuncut` binary

pub mod cli;
pub mod config;
mod error;
pub mod io;
pub mod model_file;
pub mod report;

pub use error::{Error, ParseError, Result};
pub use model_file::SavedModel;
pub use neuncut_core as core;
