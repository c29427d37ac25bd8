use thiserror::Error;

use crate::econ::Violation;
use crate::roots::RootError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the domain of a model function.
    #[error("domain error in {op}: {detail}")]
    Domain { op: &'static str, detail: String },

    #[error("invalid configuration: {}", format_violations(.0))]
    InvalidConfig(Vec<Violation>),

    /// The configuration is well formed but does not fit the solver's preconditions.
    #[error("configuration error: {0}")]
    Config(String),

    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("solver failed in {context}: {source}")]
    Solver {
        context: &'static str,
        #[source]
        source: RootError,
    },

    #[error("inconsistent solution: {0}")]
    Inconsistent(String),

    #[error("oracle error: {0}")]
    Oracle(String),

    #[error("failed to parse scenario: {0}")]
    Parse(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn domain(op: &'static str, detail: impl Into<String>) -> Self {
        Error::Domain {
            op,
            detail: detail.into(),
        }
    }

    pub(crate) fn solver(context: &'static str) -> impl FnOnce(RootError) -> Self {
        move |source| Error::Solver { context, source }
    }

    /// True for errors caused by the input rather than by numerics.
    pub fn is_config_error(&self) -> bool {
        matches!(
            self,
            Error::InvalidConfig(_) | Error::Config(_) | Error::Parse(_) | Error::Domain { .. }
        )
    }
}

fn format_violations(v: &[Violation]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join("; ")
}
