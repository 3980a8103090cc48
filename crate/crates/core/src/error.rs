use alloc::string::String;
use core::fmt;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A required column is absent, or a column is not part of the schema.
    Schema {
        column: String,
        reason: &'static str,
    },
    /// A cell could not be parsed. `row` is the 1-based data row index.
    Parse {
        row: usize,
        column: String,
        value: String,
    },
    Validation(String),
    EmptyInput(&'static str),
    Shape {
        op: &'static str,
        detail: String,
    },
    /// Gradient or parameter maps that do not line up.
    Key(String),
    Numeric(String),
    Stratification {
        class: u8,
        count: usize,
    },
    Training(String),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Schema { column, reason } => write!(f, "schema error: column `{column}` {reason}"),
            Error::Parse { row, column, value } => {
                write!(f, "row {row}: cannot parse `{value}` in column `{column}`")
            }
            Error::Validation(msg) => write!(f, "validation error: {msg}"),
            Error::EmptyInput(what) => write!(f, "empty input: {what}"),
            Error::Shape { op, detail } => write!(f, "shape error in {op}: {detail}"),
            Error::Key(msg) => write!(f, "key error: {msg}"),
            Error::Numeric(msg) => write!(f, "numeric error: {msg}"),
            Error::Stratification { class, count } => {
                write!(f, "cannot stratify: class {class} has {count} row(s), at least 2 required")
            }
            Error::Training(msg) => write!(f, "training error: {msg}"),
        }
    }
}

impl core::error::Error for Error {}

impl Error {
    /// Errors caused by bad user input rather than by a numeric failure.
    pub fn is_validation(&self) -> bool {
        !matches!(self, Error::Numeric(_) | Error::Training(_))
    }
}
