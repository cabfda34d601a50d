//! Chain/transaction data model, ABI event decoding, identifier
//! tokenization, and the indexed local transaction store.

pub mod abi;
pub mod error;
pub mod store;
pub mod tokenize;
pub mod types;

pub use abi::{decode_event, encode_event, parse_event_signature, signature_hash};
pub use error::LedgerError;
pub use store::{
    declaration_text, is_token_transfer, is_traceable, load_store_dir, save_store_dir,
    AbiRegistry, TxStore,
};
pub use tokenize::{declaration_tokens, tokenize_identifier, DeclTokens, BOUNDARY_TOKEN};
pub use types::{
    AbiType, Address, Amount, B256, ChainId, DecodedEvent, EventDecl, EventParam, HexBytes,
    InternalTransfer, KVPair, RawLog, TokenRef, Transaction, TxHash, TxKey, TxStatus, TypedValue,
};
