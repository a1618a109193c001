use thiserror::Error;

#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("pole at V = -1 while evaluating {0}")]
    Pole(&'static str),
    #[error("region error: ({v}, {c}) is not in {region}")]
    Region {
        v: f64,
        c: f64,
        region: &'static str,
    },
    #[error("no sign change while bracketing: {msg}")]
    Bracket {
        msg: String,
        profile: Vec<(f64, f64)>,
    },
    #[error("convergence failure: {0}")]
    Convergence(String),
    #[error("singular point hit near ({v}, {c})")]
    Singularity { v: f64, c: f64 },
    #[error("step budget exhausted after {0} steps")]
    Budget(usize),
    #[error("annotation error: {0}")]
    Annotation(String),
    #[error("matching error: {0}")]
    Matching(String),
    #[error("degenerate linearization: {0}")]
    Degeneracy(String),
    #[error("theory violation: {0}")]
    TheoryViolation(String),
    #[error("certification endpoint error: {0}")]
    Endpoint(String),
    #[error("{stage}: {source}")]
    Staged {
        stage: &'static str,
        source: Box<Error>,
    },
}

impl Error {
    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Domain(_) | Error::Pole(_) | Error::Region { .. } => 2,
            Error::Bracket { .. }
            | Error::Convergence(_)
            | Error::Singularity { .. }
            | Error::Budget(_)
            | Error::Matching(_)
            | Error::Degeneracy(_)
            | Error::Annotation(_)
            | Error::Endpoint(_) => 3,
            Error::TheoryViolation(_) => 4,
            Error::Staged { source, .. } => source.exit_code(),
        }
    }

    /// Wraps the error with the name of the pipeline stage that raised it.
    pub fn at(self, stage: &'static str) -> Self {
        Error::Staged {
            stage,
            source: Box::new(self),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
