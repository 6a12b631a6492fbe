use chrono::NaiveDate;
use thiserror::Error;

pub type Result<T> = std::result::Result<T, EpfError>;

#[derive(Debug, Error)]
pub enum EpfError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("missing column `{0}`")]
    MissingColumn(String),

    #[error("malformed timestamp `{value}` on line {line}")]
    MalformedTimestamp { value: String, line: u64 },

    #[error("malformed value `{value}` in column `{column}` on line {line}")]
    MalformedValue {
        value: String,
        column: String,
        line: u64,
    },

    #[error("gap at {0}")]
    Gap(String),

    #[error("duplicated hour at {0}")]
    DuplicateHour(String),

    #[error("DST repair failed on {date}: {reason}")]
    Dst { date: NaiveDate, reason: String },

    #[error("invalid dataset: {0}")]
    InvalidDataset(String),

    #[error("insufficient history: {0}")]
    InsufficientHistory(String),

    #[error("non-finite input in {0}")]
    NonFinite(&'static str),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("degenerate scale: median absolute deviation is zero")]
    DegenerateScale,

    #[error("infeasible schedule: {0}")]
    InfeasibleSchedule(String),

    #[error("invalid battery specification: {0}")]
    InvalidBess(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}
