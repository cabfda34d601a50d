use thiserror::Error;

use super::types::{B256, ChainId};

#[derive(Debug, Error)]
pub enum LedgerError {
    #[error("parse error: {0}")]
    Parse(String),
    #[error("decode error: {0}")]
    Decode(String),
    #[error("event signature mismatch")]
    SignatureMismatch,
    #[error("unknown chain {0}")]
    UnknownChain(ChainId),
    #[error("unknown transaction {0} on chain {1}")]
    UnknownTx(B256, ChainId),
    #[error("invalid record: {0}")]
    InvalidRecord(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}
