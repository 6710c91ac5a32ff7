//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by simulation, analysis, and I/O routines.
#[derive(Debug, Error)]
pub enum Error {
    /// A relative position has zero length or two agents coincide.
    #[error("degenerate formation: {0}")]
    DegenerateFormation(String),

    /// |det R| fell below the configured singularity floor.
    #[error("formation matrix near singular{t}: |det| = {det:.3e} < floor {floor:.3e}")]
    NearSingularFormation { t: TimeTag, det: f64, floor: f64 },

    /// A structural hypothesis of the control scheme does not hold.
    #[error("assumption violated: {0}")]
    AssumptionViolation(String),

    /// The field has no finite maximizer (e.g. affine).
    #[error("field has no maximizer")]
    NoMaximizer,

    /// An argument is outside its documented domain.
    #[error("invalid argument `{arg}`: {reason}")]
    InvalidArgument { arg: &'static str, reason: String },

    /// A routine was called before its required predecessor succeeded.
    #[error("precondition failed: {0}")]
    PreconditionFailed(String),

    /// An iterative routine exhausted its iteration budget.
    #[error("{what} did not converge within {iterations} iterations")]
    NonConvergence { what: &'static str, iterations: usize },

    /// Config file could not be parsed (message carries line/column).
    #[error("config syntax error: {0}")]
    ConfigSyntax(String),

    /// Config parsed but a value is semantically invalid.
    #[error("config error at `{path}`: {reason}")]
    ConfigSemantic { path: String, reason: String },

    /// Malformed trajectory CSV.
    #[error("csv format error at line {line}: {reason}")]
    CsvFormat { line: usize, reason: String },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }
}

/// Optional simulation time attached to geometry errors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeTag(pub Option<f64>);

impl std::fmt::Display for TimeTag {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self.0 {
            Some(t) => write!(f, " at t = {t}"),
            None => Ok(()),
        }
    }
}
