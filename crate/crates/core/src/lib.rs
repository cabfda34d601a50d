//! Bi-directional cross-chain transaction tracing toolkit.
//!
//! The pipeline identifies cross-chain deposits and withdrawals from event
//! logs, extracts counterpart-chain/address clues via sequence labeling,
//! localizes time-windowed candidate transactions, and ranks them with a
//! learned key-value association model. A deterministic multi-chain bridge
//! simulator provides labeled ground truth and injected attack anomalies
//! for end-to-end evaluation.

pub mod associate;
pub mod bridgesim;
pub mod identify;
pub mod ledger;
pub mod locate;
pub mod nn;
pub mod pipeline;
pub mod train;

pub use ledger::{Address, Amount, B256, ChainId, Transaction, TxHash, TxStore};
