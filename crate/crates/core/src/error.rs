use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A numeric parameter is outside the operation's domain.
    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("parse error on line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("degenerate graph: {0}")]
    DegenerateGraph(String),

    /// Shortest-path costs are only defined on connected graphs.
    #[error("graph is disconnected: no path between {from} and {to}")]
    Disconnected { from: u64, to: u64 },

    #[error("k-core with k = {k} is empty")]
    EmptyCore { k: usize },

    #[error("domain error: {0}")]
    Domain(String),

    /// A finite-difference stencil leaves the valid (a, h0) domain.
    #[error("finite-difference step {step} leaves the valid parameter domain at {at}")]
    StepTooLarge { step: f64, at: String },

    #[error("i/o error: {0}")]
    Io(String),

    #[error("{name}: {source}")]
    InTopology {
        name: String,
        #[source]
        source: Box<Error>,
    },
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl Error {
    pub fn in_topology(self, name: impl Into<String>) -> Error {
        Error::InTopology { name: name.into(), source: Box::new(self) }
    }
}

pub(crate) fn param(msg: impl Into<String>) -> Error {
    Error::Parameter(msg.into())
}
