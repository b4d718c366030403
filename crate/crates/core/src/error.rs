use thiserror::Error;

use crate::dse::{describe_violations, Violation};
use crate::mapping::MappingConfig;
use crate::platform::DataType;
use crate::schedule::OrderViolation;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("platform document: {0}")]
    PlatformParse(String),

    #[error("{field} must be positive")]
    NonPositive { field: String },

    #[error("{0}")]
    Invalid(String),

    #[error("data type {0} is not described by the platform")]
    MissingDtype(DataType),

    #[error("{requested} cores requested but the array only has {available}")]
    CoresExceeded { requested: u64, available: u64 },

    #[error("bandwidth must be positive")]
    ZeroBandwidth,

    #[error("broadcast factor {factor} does not divide {dim} = {extent}")]
    BroadcastFactor {
        factor: u64,
        dim: &'static str,
        extent: u64,
    },

    #[error("entry column {column} out of range for {columns} columns")]
    EntryColumn { column: u64, columns: u64 },

    #[error("invalid transfer order: {0}")]
    Order(#[from] OrderViolation),

    #[error("order/parameter mismatch: {0}")]
    SimMismatch(String),

    #[error("column simulation deadlocked at step {step}")]
    Deadlock { step: u64 },

    #[error("no feasible mapping; nearest candidate violates: {}", describe_violations(.violations))]
    NoFeasible {
        nearest: Option<Box<MappingConfig>>,
        violations: Vec<Violation>,
    },

    #[error("workload: {0}")]
    Workload(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
