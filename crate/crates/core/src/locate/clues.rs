//! Explicit-clue extraction and time-windowed candidate retrieval.

use thiserror::Error;

use super::model::LocatorModel;
use super::tags::Role;
use crate::ledger::{
    is_traceable, Address, ChainId, LedgerError, Transaction, TxStore, TypedValue,
};
use crate::nn::NnError;

/// Default time window: the half-hour business rule bridges advertise.
pub const DEFAULT_DELTA_S: u64 = 1800;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Forward,
    Backward,
}

/// Window around the query anchor: forward tracing searches
/// (anchor, anchor + delta], backward tracing [anchor - delta, anchor).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TimeWindow {
    pub anchor: u64,
    pub delta_s: u64,
}

impl TimeWindow {
    pub fn bounds(&self, direction: Direction) -> (u64, u64) {
        match direction {
            Direction::Forward => (self.anchor + 1, self.anchor.saturating_add(self.delta_s)),
            Direction::Backward => {
                (self.anchor.saturating_sub(self.delta_s), self.anchor.saturating_sub(1))
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ExplicitClues {
    pub direction: Direction,
    pub counterpart_chain: ChainId,
    pub counterpart_address: Address,
    pub window: TimeWindow,
}

/// Extraction result including the documented degraded mode: when only an
/// address role is found, the caller may search that address across all
/// configured chains.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClueOutcome {
    Full(ExplicitClues),
    AddressOnly {
        direction: Direction,
        counterpart_address: Address,
        window: TimeWindow,
    },
}

#[derive(Debug, Error)]
pub enum LocateError {
    #[error("no event log yields the required clue roles")]
    ClueNotFound,
    #[error("clue names unknown chain {0}")]
    UnknownChain(ChainId),
    #[error(transparent)]
    Model(#[from] NnError),
    #[error("data error: {0}")]
    Data(String),
    #[error(transparent)]
    Ledger(#[from] LedgerError),
}

fn required_roles(direction: Direction) -> (Role, Role) {
    match direction {
        Direction::Forward => (Role::DstChain, Role::DstAddr),
        Direction::Backward => (Role::SrcChain, Role::SrcAddr),
    }
}

/// Scans all decodable logs, labels their declarations, and reads the
/// counterpart chain/address values. A log containing both required roles
/// wins; otherwise the first address-role hit is reported as the degraded
/// fallback. Unknown chain ids fail closed.
pub fn extract_clues(
    tx: &Transaction,
    direction: Direction,
    model: &LocatorModel,
    store: &TxStore,
    delta_s: u64,
) -> Result<ClueOutcome, LocateError> {
    let (chain_role, addr_role) = required_roles(direction);
    let window = TimeWindow { anchor: tx.timestamp, delta_s };
    let mut address_only: Option<Address> = None;

    for log in &tx.logs {
        let Some(decl) = store.abis().decl_for(log) else { continue };
        let Ok(decoded) = crate::ledger::decode_event(log, decl) else { continue };
        let roles = model.label_parameters(decl)?;

        let mut chain_value: Option<u64> = None;
        let mut addr_value: Option<Address> = None;
        for (role, pair) in roles.iter().zip(&decoded.pairs) {
            match role {
                Some(r) if *r == chain_role => {
                    if let TypedValue::Numeric(a) = &pair.value {
                        chain_value = a.to_u64();
                    }
                }
                Some(r) if *r == addr_role => {
                    if let TypedValue::Address(a) = pair.value {
                        addr_value = Some(a);
                    }
                }
                _ => {}
            }
        }
        match (chain_value, addr_value) {
            (Some(chain), Some(address)) => {
                let chain = ChainId(chain);
                if !store.has_chain(chain) {
                    return Err(LocateError::UnknownChain(chain));
                }
                return Ok(ClueOutcome::Full(ExplicitClues {
                    direction,
                    counterpart_chain: chain,
                    counterpart_address: address,
                    window,
                }));
            }
            (None, Some(address)) => {
                address_only.get_or_insert(address);
            }
            _ => {}
        }
    }
    match address_only {
        Some(counterpart_address) => Ok(ClueOutcome::AddressOnly {
            direction,
            counterpart_address,
            window,
        }),
        None => Err(LocateError::ClueNotFound),
    }
}

/// Strict form: both roles or an error, per the module contract.
pub fn extract_explicit_clues(
    tx: &Transaction,
    direction: Direction,
    model: &LocatorModel,
    store: &TxStore,
    delta_s: u64,
) -> Result<ExplicitClues, LocateError> {
    match extract_clues(tx, direction, model, store, delta_s)? {
        ClueOutcome::Full(clues) => Ok(clues),
        ClueOutcome::AddressOnly { .. } => Err(LocateError::ClueNotFound),
    }
}

/// Candidate target transactions under the clue constraints, excluding
/// failed transactions, in store order.
#[derive(Debug, Clone)]
pub struct CandidateSet<'a> {
    pub candidates: Vec<&'a Transaction>,
}

impl CandidateSet<'_> {
    pub fn len(&self) -> usize {
        self.candidates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.candidates.is_empty()
    }
}

pub fn fetch_candidates<'a>(
    clues: &ExplicitClues,
    store: &'a TxStore,
) -> Result<CandidateSet<'a>, LocateError> {
    let (t_lo, t_hi) = clues.window.bounds(clues.direction);
    let hits = store
        .query_transactions(clues.counterpart_chain, clues.counterpart_address, t_lo, t_hi)
        .map_err(|e| match e {
            LedgerError::UnknownChain(c) => LocateError::UnknownChain(c),
            other => LocateError::Ledger(other),
        })?;
    Ok(CandidateSet { candidates: hits.into_iter().filter(|t| is_traceable(t)).collect() })
}

/// Degraded-mode retrieval: the address searched on every configured chain.
pub fn fetch_candidates_address_only<'a>(
    direction: Direction,
    address: Address,
    window: TimeWindow,
    store: &'a TxStore,
) -> Result<CandidateSet<'a>, LocateError> {
    let (t_lo, t_hi) = window.bounds(direction);
    let mut candidates = Vec::new();
    for chain in store.chains() {
        let hits = store
            .query_transactions(chain, address, t_lo, t_hi)
            .map_err(LocateError::Ledger)?;
        candidates.extend(hits.into_iter().filter(|t| is_traceable(t)));
    }
    Ok(CandidateSet { candidates })
}

/// Label-derived clue for a known pair: the first address value in the
/// query's decoded events that the counterpart transaction touches. This
/// reconstructs the explicit clue by definition, without a trained model;
/// calibration and training-set construction run on it.
pub fn ground_truth_clue(
    query: &Transaction,
    counterpart: &Transaction,
    store: &TxStore,
) -> Option<(ChainId, Address)> {
    let graph = crate::identify::build_transfer_graph(counterpart, store.abis());
    let mut involved = graph.nodes;
    involved.insert(counterpart.from_addr);
    if let Some(to) = counterpart.to_addr {
        involved.insert(to);
    }
    for ev in store.abis().decode_tx(query) {
        for pair in ev.pairs {
            if let TypedValue::Address(a) = pair.value {
                if a != Address::ZERO && involved.contains(&a) {
                    return Some((counterpart.chain, a));
                }
            }
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn window_bounds_per_direction() {
        let w = TimeWindow { anchor: 1000, delta_s: 60 };
        assert_eq!(w.bounds(Direction::Forward), (1001, 1060));
        assert_eq!(w.bounds(Direction::Backward), (940, 999));
        let early = TimeWindow { anchor: 30, delta_s: 60 };
        assert_eq!(early.bounds(Direction::Backward), (0, 29));
    }
}
