use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error("topology error: {0}")]
    Topology(String),
    #[error("chain error: {0}")]
    Chain(String),
    #[error("numerical error: {0}")]
    Numerical(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("diverged at iteration {iteration}: norm {norm:e} exceeds the divergence threshold")]
    Divergence { iteration: usize, norm: f64 },
    #[error("search failure: {0}")]
    Search(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Short machine-readable tag, used by the CLI error line.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Parameter(_) => "parameter",
            Error::Topology(_) => "topology",
            Error::Chain(_) => "chain",
            Error::Numerical(_) => "numerical",
            Error::Data(_) => "data",
            Error::Parse(_) => "parse",
            Error::Config(_) => "config",
            Error::Divergence { .. } => "divergence",
            Error::Search(_) => "search",
            Error::Io(_) => "io",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
