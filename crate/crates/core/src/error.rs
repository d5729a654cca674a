use thiserror::Error;

/// Errors raised by the semantic layer (fibres, chains, transformers, techniques).
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("carrier mismatch: {left} vs {right}")]
    CarrierMismatch { left: String, right: String },

    #[error("fibre mismatch: {0}")]
    FibreMismatch(String),

    #[error("element {elem} is not in carrier {carrier}")]
    NotInCarrier { elem: String, carrier: String },

    #[error("carrier {0} cannot be enumerated")]
    NotEnumerable(String),

    #[error("intensional predicate over {0} needs an explicit probe set")]
    NoProbes(String),

    #[error("valuation {0} lies outside [0,1]")]
    OutOfRange(String),

    #[error("chain did not stabilise within {0} indices")]
    NotStabilized(usize),

    #[error("declared section is not a section: {0}")]
    InvalidSection(String),

    #[error("size bound exceeded: {0}")]
    SizeBound(String),

    #[error("unproductive stream definition: {0}")]
    Unproductive(String),

    #[error("undeclared operation `{0}`")]
    UndeclaredOp(String),

    #[error("undefined stream `{0}`")]
    UndefinedStream(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("not monotone: {0}")]
    NotMonotone(String),

    #[error("budget exhausted: {0}")]
    Budget(String),

    #[error("{0}")]
    Invalid(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::Invalid(msg.into())
}
