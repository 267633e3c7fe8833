use chrono::NaiveDate;
use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("date {date} falls outside the binned range [{start}, {end})")]
    DateOutOfRange {
        date: NaiveDate,
        start: NaiveDate,
        end: NaiveDate,
    },
    #[error("unresolvable date label '{0}' (expected YYYY, YYYY-MM or YYYY-MM-DD)")]
    BadDate(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("unknown id '{0}'")]
    UnknownId(String),
    #[error("no signal in cluster")]
    NoSignal,
    #[error("style '{0}' never observed")]
    StyleNeverObserved(String),
    #[error("empty corpus after filtering")]
    EmptyCorpus,
    #[error("series too short: {0}")]
    InsufficientLength(String),
    #[error("no documents carry label {0}")]
    NoDocuments(usize),
    #[error("training diverged at epoch {epoch} (loss {loss})")]
    Diverged { epoch: usize, loss: f64 },
    #[error("empty input: {0}")]
    Empty(String),
    #[error("synthetic generation failed: {0}")]
    Generation(String),
}
