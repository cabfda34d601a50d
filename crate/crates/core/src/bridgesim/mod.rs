//! Deterministic multi-chain world generator: labeled cross-chain pairs
//! under several bridge mechanisms, non-cross-chain noise, and injected
//! attack anomalies.

pub mod config;
pub mod dataset;
pub mod generate;

pub use config::{
    AttackKind, AttackTemplate, BridgeSpec, CueKind, CueTemplate, Mechanism, SimError, Vocab,
    WorldConfig,
};
pub use dataset::{LabeledDataset, NerAnnotation, PairLabel, Split};
pub use generate::{default_config, generate, inject_attacks, WORLD_EPOCH};
