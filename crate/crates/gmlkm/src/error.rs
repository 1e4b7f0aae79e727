use thiserror::Error;

/// Errors surfaced by loaders, the association pipeline, and the evaluation
/// harness. `Input` covers malformed documents and violated preconditions;
/// `Integrity` covers internally inconsistent association state.
#[derive(Debug, Error)]
pub enum Error {
    #[error("malformed document: {0}")]
    Parse(String),

    #[error("invalid topology: {0}")]
    Topology(String),

    #[error("invalid measurements: {0}")]
    Measurement(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid clustering request: {0}")]
    Clustering(String),

    #[error("intersection {name}: {message}")]
    Intersection { name: String, message: String },

    #[error("integrity error: {0}")]
    Integrity(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for errors caused by bad inputs rather than inconsistent
    /// association state. The CLI maps the two classes to distinct exit codes.
    pub fn is_input_error(&self) -> bool {
        !matches!(self, Error::Integrity(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
