use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum Error {
    #[error("{0} is not coprime to 6")]
    NotInPi(String),

    #[error("invalid symbol sequence: {0}")]
    InvalidSequence(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("empty orbit record")]
    EmptyRecord,

    #[error("k={k} forces delta={expected}, got {got}")]
    DeltaMismatch { k: u32, expected: i8, got: i8 },

    #[error("k={k} is not admissible from (r={r}, delta={delta}, delta_prev={delta_prev})")]
    Inadmissible { r: String, delta: i8, delta_prev: i8, k: u32 },

    #[error("oracle scan does not form a single progression: {0}")]
    NotAProgression(String),

    #[error("budget exceeded: {requested} > {limit} ({what})")]
    BudgetExceeded { what: &'static str, requested: u128, limit: u128 },

    #[error("empty table")]
    EmptyTable,
}
