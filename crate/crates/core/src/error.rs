use alloc::string::String;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("illegal action category {0}")]
    IllegalCategory(u8),
    #[error("trustee category {trustee} is not legal after investor category {investor}")]
    IllegalReturn { investor: u8, trustee: u8 },
    #[error("amount {amount} outside [0, {max}]")]
    AmountOutOfRange { amount: i64, max: i64 },
    #[error("guilt {0} is not one of 0, 0.4, 1")]
    UnknownGuilt(f64),
    #[error("likelihood {0} outside [0, 1]")]
    LikelihoodOutOfRange(f64),
    #[error("invalid agent spec: {0}")]
    InvalidSpec(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("invalid record: {0}")]
    InvalidRecord(String),
    #[error("sample must be non-empty")]
    EmptySample,
}

pub type Result<T> = core::result::Result<T, Error>;
