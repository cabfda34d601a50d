//! World and bridge configuration for the multi-chain simulator.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ledger::ChainId;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Ledger(#[from] crate::ledger::LedgerError),
    #[error("toml: {0}")]
    Toml(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mechanism {
    /// Lock native value on the source chain, mint a wrapped token on the
    /// destination chain.
    LockMint,
    /// Burn a wrapped token on the source chain, unlock native value on the
    /// destination chain.
    BurnUnlock,
    /// Token transfer into a pool on one side, out of a pool on the other.
    LiquidityPool,
}

/// Identifier names a bridge uses for the six clue-bearing roles.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Vocab {
    pub src_chain: String,
    pub dst_chain: String,
    pub sender: String,
    pub recipient: String,
    pub amount: String,
    pub nonce_cue: String,
}

impl Vocab {
    pub fn roles(&self) -> [(&str, &str); 6] {
        [
            ("src_chain", &self.src_chain),
            ("dst_chain", &self.dst_chain),
            ("sender", &self.sender),
            ("recipient", &self.recipient),
            ("amount", &self.amount),
            ("nonce_cue", &self.nonce_cue),
        ]
    }
}

/// Kinds of implicit-cue fields replicated verbatim across the two halves
/// of a pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CueKind {
    /// Per-pair random 64-bit counter value.
    Nonce,
    /// Bridge-wide fixed address (messenger/validator style).
    Messenger,
    /// Per-pair random 32-byte digest.
    TransferId,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CueTemplate {
    pub name: String,
    pub kind: CueKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BridgeSpec {
    pub name: String,
    pub mechanism: Mechanism,
    /// Fraction of the deposit amount kept as fee, in [0, 0.03]. Applied in
    /// integer arithmetic at parts-per-million resolution.
    pub fee_rate: f64,
    /// (min_s, max_s) uniform-integer deposit-to-withdrawal latency.
    pub latency: (u64, u64),
    pub vocab: Vocab,
    /// Cue fields shared verbatim between the deposit and withdrawal
    /// events. Must contain at least one `Nonce` cue, and the first one is
    /// named by `vocab.nonce_cue`.
    pub implicit_cues: Vec<CueTemplate>,
}

impl BridgeSpec {
    pub fn fee_ppm(&self) -> u64 {
        (self.fee_rate * 1e6).round() as u64
    }

    pub fn validate(&self) -> Result<(), SimError> {
        if self.name.is_empty() {
            return Err(SimError::Config("bridge name is empty".into()));
        }
        if !(0.0..=0.03).contains(&self.fee_rate) {
            return Err(SimError::Config(format!(
                "bridge {}: fee_rate {} outside [0, 0.03]",
                self.name, self.fee_rate
            )));
        }
        if self.latency.0 < 1 || self.latency.0 > self.latency.1 {
            return Err(SimError::Config(format!(
                "bridge {}: bad latency range {:?}",
                self.name, self.latency
            )));
        }
        if self.vocab.roles().iter().any(|(_, name)| name.is_empty()) {
            return Err(SimError::Config(format!(
                "bridge {}: vocabulary must cover all six roles",
                self.name
            )));
        }
        let first_nonce = self.implicit_cues.iter().find(|c| c.kind == CueKind::Nonce);
        match first_nonce {
            Some(cue) if cue.name == self.vocab.nonce_cue => Ok(()),
            Some(cue) => Err(SimError::Config(format!(
                "bridge {}: nonce cue {:?} disagrees with vocab {:?}",
                self.name, cue.name, self.vocab.nonce_cue
            ))),
            None => Err(SimError::Config(format!(
                "bridge {}: needs at least one nonce-kind implicit cue",
                self.name
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttackKind {
    /// Deposit event claims zero and nothing moves, yet a withdrawal pays
    /// out.
    ZeroDeposit,
    /// Deposit event claims an amount but the transfer graph shows no
    /// lock/burn.
    UnburnedWrap,
    /// Withdrawal amount strictly above the deposit amount.
    InflatedWithdrawal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttackTemplate {
    pub kind: AttackKind,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldConfig {
    pub seed: u64,
    pub chains: Vec<ChainId>,
    pub n_pairs_per_bridge: usize,
    /// Non-cross-chain transactions generated per cross-chain transaction.
    pub noise_ratio: f64,
    pub bridges: Vec<BridgeSpec>,
    #[serde(default)]
    pub attacks: Vec<AttackTemplate>,
}

impl WorldConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        if self.chains.len() < 2 {
            return Err(SimError::Config("need at least 2 chains".into()));
        }
        let mut ids: Vec<u64> = self.chains.iter().map(|c| c.0).collect();
        ids.sort();
        ids.dedup();
        if ids.len() != self.chains.len() || ids.iter().any(|&id| id == 0) {
            return Err(SimError::Config("chain ids must be unique and positive".into()));
        }
        if self.n_pairs_per_bridge < 1 {
            return Err(SimError::Config("n_pairs_per_bridge must be >= 1".into()));
        }
        if self.noise_ratio < 0.0 {
            return Err(SimError::Config("noise_ratio must be >= 0".into()));
        }
        if self.bridges.is_empty() {
            return Err(SimError::Config("need at least 1 bridge".into()));
        }
        let mut names: Vec<&str> = self.bridges.iter().map(|b| b.name.as_str()).collect();
        names.sort();
        names.dedup();
        if names.len() != self.bridges.len() {
            return Err(SimError::Config("bridge names must be unique".into()));
        }
        for bridge in &self.bridges {
            bridge.validate()?;
        }
        Ok(())
    }

    pub fn from_toml_str(text: &str) -> Result<Self, SimError> {
        let config: WorldConfig = toml::from_str(text).map_err(|e| SimError::Toml(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn to_toml_string(&self) -> Result<String, SimError> {
        toml::to_string_pretty(self).map_err(|e| SimError::Toml(e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bridgesim::default_config;

    #[test]
    fn default_config_is_valid_and_round_trips_toml() {
        let config = default_config(42);
        config.validate().unwrap();
        assert!(config.bridges.len() >= 6);
        assert!(config.chains.len() >= 3);
        assert!(config.bridges.len() * config.n_pairs_per_bridge >= 2000);
        assert!(config.noise_ratio >= 3.0);
        let text = config.to_toml_string().unwrap();
        let back = WorldConfig::from_toml_str(&text).unwrap();
        assert_eq!(back, config);
    }

    #[test]
    fn fee_rate_outside_bound_is_rejected() {
        let mut config = default_config(1);
        config.bridges[0].fee_rate = 0.05;
        assert!(config.validate().is_err());
    }

    #[test]
    fn single_chain_rejected() {
        let mut config = default_config(1);
        config.chains.truncate(1);
        assert!(config.validate().is_err());
    }
}
