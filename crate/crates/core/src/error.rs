use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid time range: end {end} precedes start {start}")]
    TimeRange { end: i64, start: i64 },

    #[error("system is not asymptotically stable: monodromy spectral radius {radius}")]
    Unstable { radius: f64 },

    #[error("Lyapunov iteration did not converge within {iterations} doublings")]
    NonConvergence { iterations: usize },

    #[error("projection does not match the system: {0}")]
    ProjectionMismatch(String),

    #[error("balancing basis is empty: cross-Gramian factor product is numerically zero")]
    EmptyBasis,

    #[error("reduced order {requested} outside 1..={available}")]
    OrderOutOfRange { requested: usize, available: usize },

    #[error("controllability Gramian is singular (condition number {condition:e})")]
    Unreachable { condition: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("{context}: {source}")]
    Context {
        context: String,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn context(self, context: impl Into<String>) -> Self {
        Error::Context {
            context: context.into(),
            source: Box::new(self),
        }
    }

    /// Innermost error, skipping any context wrappers.
    pub fn root(&self) -> &Error {
        match self {
            Error::Context { source, .. } => source.root(),
            other => other,
        }
    }

    /// True for failures of the numerics rather than of the inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self.root(),
            Error::Unstable { .. }
                | Error::NonConvergence { .. }
                | Error::EmptyBasis
                | Error::Unreachable { .. }
        )
    }
}
