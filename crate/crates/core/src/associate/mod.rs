//! Cross-chain transaction association: key-value encodings, transaction
//! embeddings over the KV set, Siamese scoring, and candidate ranking.

pub mod encoding;
pub mod model;

pub use encoding::{numeric_bits, pre_encode_value, PreValue, ValueEncoding, ValueKind};
pub use model::{
    rank_and_select, train_associator, AssociateError, AssociationScores, AssociatorHyper,
    AssociatorModel, PreKv,
};
