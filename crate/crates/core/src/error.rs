use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("invalid data: {0}")]
    InvalidData(String),
    #[error("invalid state: {0}")]
    InvalidState(String),
    #[error("singular design: {0}")]
    SingularDesign(String),
    #[error("diagnostics unavailable: {0}")]
    DiagnosticsUnavailable(String),
    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },
    #[error("unknown scenario `{0}`")]
    UnknownScenario(String),
    #[error("unknown model `{0}` (expected one of: hm, none, exnex, proposed)")]
    UnknownModel(String),
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// True for errors caused by bad user input rather than a failure while
    /// computing.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::InvalidArgument(_)
                | Error::InvalidData(_)
                | Error::Parse { .. }
                | Error::UnknownScenario(_)
                | Error::UnknownModel(_)
                | Error::Config(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid_arg<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidArgument(msg.into()))
}
