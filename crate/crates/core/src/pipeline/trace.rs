//! End-to-end tracing: identification gate, clue extraction, candidate
//! retrieval, and association ranking.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::associate::{AssociateError, AssociatorModel};
use crate::identify::{IdentifyModel, TxLabel};
use crate::ledger::{ChainId, LedgerError, Transaction, TxHash, TxStore};
use crate::locate::{
    extract_clues, fetch_candidates, fetch_candidates_address_only, ClueOutcome, Direction,
    LocateError, LocatorModel, DEFAULT_DELTA_S,
};
use crate::nn::NnError;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("unknown transaction {0} on chain {1}")]
    UnknownTx(TxHash, ChainId),
    #[error(transparent)]
    Model(#[from] NnError),
    #[error(transparent)]
    Locate(#[from] LocateError),
    #[error(transparent)]
    Associate(#[from] AssociateError),
    #[error(transparent)]
    Ledger(#[from] LedgerError),
    #[error("data error: {0}")]
    Data(String),
}

/// The three trained models the tracer needs, loaded from one directory
/// (`identify.ckpt`, `locate.ckpt`, `associate.ckpt`).
#[derive(Debug)]
pub struct Models {
    pub identify: IdentifyModel,
    pub locate: LocatorModel,
    pub associate: AssociatorModel,
}

impl Models {
    pub fn load_dir(dir: &Path) -> Result<Models, NnError> {
        Ok(Models {
            identify: IdentifyModel::load(&dir.join("identify.ckpt"))?,
            locate: LocatorModel::load(&dir.join("locate.ckpt"))?,
            associate: AssociatorModel::load(&dir.join("associate.ckpt"))?,
        })
    }

    pub fn save_dir(&mut self, dir: &Path) -> Result<(), NnError> {
        std::fs::create_dir_all(dir).map_err(NnError::Io)?;
        self.identify.save(&dir.join("identify.ckpt"))?;
        self.locate.save(&dir.join("locate.ckpt"))?;
        self.associate.save(&dir.join("associate.ckpt"))?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TraceDirective {
    Forward,
    Backward,
    Auto,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TraceStatus {
    Matched,
    NoClues,
    EmptyCandidates,
    NotCrossChain,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TxRef {
    pub chain: ChainId,
    pub tx_hash: TxHash,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TraceResult {
    pub query: TxRef,
    pub direction: Direction,
    pub status: TraceStatus,
    pub matched: Option<TxRef>,
    pub score: f64,
    pub candidate_count: usize,
}

#[derive(Debug, Clone, Copy)]
pub struct TraceOptions {
    pub delta_s: u64,
    /// Trace even when the identification gate says non-cross-chain (the
    /// forensics override for explicitly directed traces).
    pub force: bool,
}

impl Default for TraceOptions {
    fn default() -> Self {
        TraceOptions { delta_s: DEFAULT_DELTA_S, force: false }
    }
}

fn unmatched(
    tx: &Transaction,
    direction: Direction,
    status: TraceStatus,
    candidate_count: usize,
) -> TraceResult {
    TraceResult {
        query: TxRef { chain: tx.chain, tx_hash: tx.tx_hash },
        direction,
        status,
        matched: None,
        score: 0.0,
        candidate_count,
    }
}

/// Traces one transaction. The classifier gates the pipeline; `auto` maps
/// deposits to forward and withdrawals to backward tracing.
pub fn trace(
    store: &TxStore,
    models: &Models,
    chain: ChainId,
    hash: TxHash,
    directive: TraceDirective,
    opts: &TraceOptions,
) -> Result<TraceResult, PipelineError> {
    let tx = store.get(chain, hash).ok_or(PipelineError::UnknownTx(hash, chain))?;
    let (label, _probs) = models.identify.classify_tx(tx, store)?;

    let direction = match (directive, label) {
        (TraceDirective::Auto, TxLabel::Deposit) => Direction::Forward,
        (TraceDirective::Auto, TxLabel::Withdrawal) => Direction::Backward,
        (TraceDirective::Auto, TxLabel::NonCrossChain) => {
            return Ok(unmatched(tx, Direction::Forward, TraceStatus::NotCrossChain, 0));
        }
        (TraceDirective::Forward, _) => Direction::Forward,
        (TraceDirective::Backward, _) => Direction::Backward,
    };
    if label == TxLabel::NonCrossChain && directive != TraceDirective::Auto && !opts.force {
        return Ok(unmatched(tx, direction, TraceStatus::NotCrossChain, 0));
    }

    let outcome = match extract_clues(tx, direction, &models.locate, store, opts.delta_s) {
        Ok(outcome) => outcome,
        Err(LocateError::ClueNotFound) | Err(LocateError::UnknownChain(_)) => {
            return Ok(unmatched(tx, direction, TraceStatus::NoClues, 0));
        }
        Err(e) => return Err(e.into()),
    };
    let set = match outcome {
        ClueOutcome::Full(clues) => fetch_candidates(&clues, store)?,
        ClueOutcome::AddressOnly { direction, counterpart_address, window } => {
            fetch_candidates_address_only(direction, counterpart_address, window, store)?
        }
    };
    let candidates: Vec<&Transaction> = set
        .candidates
        .into_iter()
        .filter(|t| !(t.chain == chain && t.tx_hash == hash))
        .collect();
    if candidates.is_empty() {
        return Ok(unmatched(tx, direction, TraceStatus::EmptyCandidates, 0));
    }

    let q_emb = models.associate.encode_transaction(tx, store)?;
    let mut cand_embs = Vec::with_capacity(candidates.len());
    for cand in &candidates {
        cand_embs.push(models.associate.encode_transaction(cand, store)?);
    }
    let scores = models.associate.score_candidates(&q_emb, &cand_embs)?;
    let selected = crate::associate::rank_and_select(&scores, &candidates)?;
    let selected_idx = candidates
        .iter()
        .position(|t| t.tx_hash == selected.tx_hash && t.chain == selected.chain)
        .expect("selected candidate is in the set");

    Ok(TraceResult {
        query: TxRef { chain, tx_hash: hash },
        direction,
        status: TraceStatus::Matched,
        matched: Some(TxRef { chain: selected.chain, tx_hash: selected.tx_hash }),
        score: scores.scores[selected_idx],
        candidate_count: candidates.len(),
    })
}
