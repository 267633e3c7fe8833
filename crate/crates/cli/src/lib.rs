//! Library side of the `trendcause` command line: file formats, SVG
//! charts, run configuration and the staged pipeline.

pub mod chart;
pub mod config;
pub mod error;
pub mod io;
pub mod pipeline;
pub mod stages;

pub use error::{CliError, CliResult};
