use std::fmt;

/// A single offending parameter, named by its field path.
#[derive(Clone, Debug, PartialEq)]
pub struct ParamIssue {
    pub field: String,
    pub reason: String,
}

impl ParamIssue {
    pub fn new(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Self { field: field.into(), reason: reason.into() }
    }
}

impl fmt::Display for ParamIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.reason)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid dimension {dim}: {reason}")]
    InvalidDimension { dim: usize, reason: &'static str },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("state is not normalized (norm {norm})")]
    NotNormalized { norm: f64 },

    #[error("degenerate state specification: {0}")]
    DegenerateSpec(String),

    #[error("division by zero: {0}")]
    DivisionByZero(&'static str),

    #[error("numerical blow-up at t = {t} (dt = {dt}): {detail}")]
    NumericalBlowup { t: f64, dt: f64, detail: String },

    #[error("invalid parameters: {}", format_issues(.0))]
    InvalidParameters(Vec<ParamIssue>),

    #[error("outcome N = {n} is unreachable (probability {probability:e})")]
    ImpossibleOutcome { n: usize, probability: f64 },

    #[error("flatness diagnostic undefined: every product c_n c_(N-n) vanishes for N = {n}")]
    UndefinedDiagnostic { n: usize },

    #[error("truncation too small: {0}")]
    TruncationTooSmall(String),

    #[error("grid too small: {0}")]
    UndersizedGrid(String),

    #[error("ensemble failed: {failed} of {total} trajectories blew up")]
    EnsembleFailure { failed: usize, total: usize },
}

fn format_issues(issues: &[ParamIssue]) -> String {
    issues.iter().map(|i| i.to_string()).collect::<Vec<_>>().join("; ")
}

impl Error {
    pub fn invalid(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidParameters(vec![ParamIssue::new(field, reason)])
    }
}

pub type Result<T> = std::result::Result<T, Error>;
