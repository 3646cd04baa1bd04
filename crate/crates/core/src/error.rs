use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Invalid configuration or construction parameters.
    #[error("configuration error: {0}")]
    Config(String),

    /// A caller passed arguments that violate an operation's preconditions.
    #[error("usage error: {0}")]
    Usage(String),

    /// Random sampling produced an unusable draw (e.g. zero sample variance).
    #[error("sampling error: {0}")]
    Sampling(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    /// Internal ordering bug, such as depositing before boundary conditions ran.
    #[error("logic error: {0}")]
    Logic(String),

    #[error("fit error: {0}")]
    Fit(String),

    #[error("invariant violation: {0}")]
    Invariant(String),

    #[error("step {step} ({phase}): {source}")]
    Step {
        step: u64,
        phase: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn at_step(self, step: u64, phase: &'static str) -> Self {
        Error::Step {
            step,
            phase,
            source: Box::new(self),
        }
    }

    /// Process exit code for the command line front end: 2 for configuration
    /// problems, 3 for numerical failures, 1 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Json(_) => 2,
            Error::Numerical(_)
            | Error::Sampling(_)
            | Error::Logic(_)
            | Error::Invariant(_)
            | Error::Fit(_) => 3,
            Error::Step { source, .. } => source.exit_code(),
            Error::Usage(_) | Error::Io(_) | Error::Csv(_) => 1,
        }
    }
}
