//! Cross-chain transaction identification: is a transaction a deposit, a
//! withdrawal, or not cross-chain at all? Transfer-graph statistics fused
//! with event-name text semantics feed a three-way classifier.

pub mod features;
pub mod graph;
pub mod model;

pub use features::{encode_asset_semantics, ASSET_DIM};
pub use graph::{build_transfer_graph, EdgeOrigin, TransferEdge, TransferGraph};
pub use model::{
    extract_features, gold_labels, macro_f1, train_identifier, train_identifier_with_labels,
    IdentifyHyper, IdentifyModel, TxLabel,
};
