//! Discovery of statistical influence between dated text-topic trends and
//! visual-style trends, plus the downstream uses of those influences:
//! trend forecasting, timeline construction and photo timestamping.
//!
//! Every module here is pure: inputs arrive in memory, results are returned
//! as values, and any randomness is driven by an explicit seed. File and
//! process I/O lives in the `trendcause` CLI crate.

pub mod binning;
pub mod error;
pub mod forecast;
pub mod influence;
pub mod ols;
pub mod stats;
pub mod synth;
pub mod style;
pub mod timeline;
pub mod timestamp;
pub mod topics;
pub mod trend;

pub use binning::{BinWidth, DateBinning};
pub use error::{Error, Result};
pub use trend::{InstanceRecord, StyleAssignment, TrendKind, TrendSeries, TrendSet};
