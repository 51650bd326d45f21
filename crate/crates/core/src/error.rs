use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{field} = {value} is outside [0, 1]")]
    OutOfRange { field: String, value: f64 },

    #[error("cohort must contain at least one case")]
    EmptyCohort,

    #[error("{0}")]
    Invalid(String),

    #[error("enumeration needs whole-number counts: {0}")]
    NonIntegral(String),

    #[error("cohort of {n} cases exceeds the enumeration limit of {limit}; use the `bounds` command instead")]
    CohortTooLarge { n: u64, limit: u64 },

    #[error("no records to process")]
    Empty,

    #[error("incomplete grid, missing cells (ref_se, ref_sp): {0}")]
    IncompleteGrid(String),

    #[error("config line {line}: {message}")]
    Config { line: usize, message: String },

    #[error("table parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
