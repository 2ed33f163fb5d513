use thiserror::Error;

/// Library-wide error type.
///
/// The CLI maps these onto exit codes: configuration problems → 2, data
/// problems → 3, degenerate statistics/cutoffs → 4.
#[derive(Debug, Error)]
pub enum Error {
    /// Invalid configuration (parameter out of range, inconsistent options).
    #[error("invalid configuration: {0}")]
    Config(String),

    /// Argument outside a function's mathematical domain.
    #[error("domain error: {0}")]
    Domain(String),

    /// Malformed or unusable input data.
    #[error("data error: {0}")]
    Data(String),

    /// A cutoff resolution produced no usable threshold on a span.
    #[error("degenerate cutoff on {span}: {reason}")]
    DegenerateCutoff { span: String, reason: String },

    /// A statistic's denominator vanished; no decision can be made.
    #[error("degenerate statistic: {0}")]
    DegenerateStatistic(String),

    /// An increment series came out empty (stride exceeds every day segment).
    #[error("empty increment series: {0}")]
    EmptySeries(String),

    /// Iterative numerics failed to converge within budget.
    #[error("numerical failure: {0}")]
    Numerics(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Exit code for the CLI: 2 config, 3 data, 4 degenerate statistic.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Domain(_) | Error::Numerics(_) => 2,
            Error::Data(_) | Error::Io(_) => 3,
            Error::DegenerateCutoff { .. }
            | Error::DegenerateStatistic(_)
            | Error::EmptySeries(_) => 4,
        }
    }
}
