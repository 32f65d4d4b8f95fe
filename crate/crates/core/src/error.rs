use thiserror::Error;

use crate::state::QubusId;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("malformed state: {0}")]
    MalformedState(String),
    #[error("qubus {0} is not live")]
    UnknownQubus(QubusId),
    #[error("qubus {0} is already live")]
    QubusAlreadyLive(QubusId),
    #[error("photon {photon} mode {mode} outside declared arity {arity}")]
    ModeOutOfRange { photon: usize, mode: u16, arity: u16 },
    #[error("photon index {0} out of range")]
    PhotonOutOfRange(usize),
    #[error("matrix is not unitary (residual {residual:.3e})")]
    NotUnitary { residual: f64 },
    #[error("dimension {0} is not a power of two")]
    NotPowerOfTwo(usize),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("conditional phase references record {depth} but {available} records are in scope")]
    NoOutcomeInScope { depth: usize, available: usize },
    #[error("conditional phase references a record that differs between merged outcome classes")]
    AmbiguousRecord,
    #[error("detector peaks not separable: {0}")]
    PeaksOverlap(String),
    #[error("outcome tree exceeded the node budget of {0}")]
    BudgetExceeded(usize),
    #[error("invalid program: {0}")]
    InvalidProgram(String),
}
