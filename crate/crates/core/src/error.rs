use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = CramError> = std::result::Result<T, E>;

/// Coarse error classes. The CLI maps each family onto a distinct exit code
/// and the C API onto a distinct status code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorFamily {
    Input,
    Contract,
    Numeric,
    Io,
}

impl ErrorFamily {
    pub fn exit_code(self) -> i32 {
        match self {
            ErrorFamily::Input => 2,
            ErrorFamily::Contract => 3,
            ErrorFamily::Numeric => 4,
            ErrorFamily::Io => 5,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ErrorFamily::Input => "input",
            ErrorFamily::Contract => "contract",
            ErrorFamily::Numeric => "numeric",
            ErrorFamily::Io => "io",
        }
    }
}

#[derive(Debug, Error)]
pub enum CramError {
    #[error("shape mismatch in {context}: expected {expected}, got {found}")]
    Shape {
        context: &'static str,
        expected: String,
        found: String,
    },

    #[error("matrix is not symmetric (max asymmetry {asymmetry:e})")]
    NotSymmetric { asymmetry: f64 },

    #[error("matrix is not positive semidefinite (eigenvalue {eigenvalue:e})")]
    NotPsd { eigenvalue: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("degenerate smoother at row {row}: kernel mass vanishes around x0 = {x0}")]
    DegenerateSmoother { row: usize, x0: f64 },

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("non-finite values at sweep {sweep}, coordinate {coordinate}")]
    NonFinite { sweep: usize, coordinate: usize },

    #[error("at lambda grid index {index}: {source}")]
    Path {
        index: usize,
        #[source]
        source: Box<CramError>,
    },

    #[error("fold {fold}: {source}")]
    Fold {
        fold: usize,
        #[source]
        source: Box<CramError>,
    },

    #[error("missing column '{0}'")]
    MissingColumn(String),

    #[error("non-numeric cell at row {row}, column '{column}': '{value}'")]
    NonNumeric {
        row: usize,
        column: String,
        value: String,
    },

    #[error("{count} row(s) with missing values in selected columns")]
    MissingValues { count: usize },

    #[error("covariate '{0}' has zero second moment")]
    ZeroSecondMoment(String),

    #[error("unsupported model format version {found} (expected {expected})")]
    Version { found: u64, expected: u64 },

    #[error("malformed model file: {0}")]
    Parse(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

impl CramError {
    pub fn family(&self) -> ErrorFamily {
        use CramError::*;
        match self {
            Shape { .. } | Contract(_) => ErrorFamily::Contract,
            NotSymmetric { .. } | NotPsd { .. } | NonFinite { .. } | DegenerateSmoother { .. } => {
                ErrorFamily::Numeric
            }
            InvalidArgument(_)
            | MissingColumn(_)
            | NonNumeric { .. }
            | MissingValues { .. }
            | ZeroSecondMoment(_)
            | Version { .. }
            | Parse(_) => ErrorFamily::Input,
            Path { source, .. } | Fold { source, .. } => source.family(),
            Io { .. } => ErrorFamily::Io,
            Csv(e) => {
                if e.is_io_error() {
                    ErrorFamily::Io
                } else {
                    ErrorFamily::Input
                }
            }
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CramError::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn shape(
        context: &'static str,
        expected: impl ToString,
        found: impl ToString,
    ) -> Self {
        CramError::Shape {
            context,
            expected: expected.to_string(),
            found: found.to_string(),
        }
    }
}
