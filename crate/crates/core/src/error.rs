use thiserror::Error;

/// Error classes shared by every module.
///
/// Each variant maps to a stable machine-readable code (see [`Error::code`])
/// and a process exit status used by the command-line front end.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("sampling error: {0}")]
    Sampling(String),
    #[error("estimation failure: {0}")]
    EstimationFailure(String),
    #[error("degenerate input: {0}")]
    DegenerateInput(String),
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("model domain error: {0}")]
    ModelDomain(String),
    #[error("division domain error: {0}")]
    DivisionDomain(String),
    #[error("out of model: {0}")]
    OutOfModel(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("format error: {0}")]
    Format(String),
    #[error("acceptance failure: {0}")]
    Acceptance(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn code(&self) -> &'static str {
        match self {
            Error::InvalidArgument(_) => "invalid-argument",
            Error::Sampling(_) => "sampling-error",
            Error::EstimationFailure(_) => "estimation-failure",
            Error::DegenerateInput(_) => "degenerate-input",
            Error::InsufficientData(_) => "insufficient-data",
            Error::ModelDomain(_) => "model-domain-error",
            Error::DivisionDomain(_) => "division-domain-error",
            Error::OutOfModel(_) => "out-of-model",
            Error::Config(_) => "config-error",
            Error::Format(_) => "format-error",
            Error::Acceptance(_) => "acceptance-failure",
            Error::Io(_) => "io-error",
        }
    }

    /// Process exit status: 2 config, 3 data/format, 4 acceptance, 5 io.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 2,
            Error::Acceptance(_) => 4,
            Error::Io(_) => 5,
            _ => 3,
        }
    }
}

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
