use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error: {0}")]
    Parse(String),
    #[error("invalid input:\n  {}", .0.join("\n  "))]
    Invalid(Vec<String>),
    #[error("multiset underflow on `{name}`: have {have}, need {need}")]
    Underflow { name: String, have: u64, need: u64 },
    #[error("bound exceeded: {0}")]
    Bound(String),
    #[error("state space exceeds cap of {cap} nodes")]
    CapExceeded { cap: usize },
    #[error("unknown name `{0}`")]
    UnknownName(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}
