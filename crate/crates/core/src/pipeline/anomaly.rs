//! Anomaly flagging over traced pairs. Amounts are transfer-graph totals
//! into/out of the bridge accounts (the transaction's router plus the zero
//! address), so event-claimed amounts cannot mask an empty movement.

use std::collections::BTreeSet;

use num_bigint::BigUint;
use serde::{Deserialize, Serialize};

use super::trace::PipelineError;
use crate::identify::build_transfer_graph;
use crate::ledger::{Address, Amount, ChainId, TxHash, TxStore};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnomalyFlag {
    ZeroDeposit,
    WithdrawalExceedsDeposit,
    #[serde(rename = "fee_above_3pct")]
    FeeAbove3Pct,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AnomalyReport {
    pub src_chain: ChainId,
    pub src_tx: TxHash,
    pub dst_chain: ChainId,
    pub dst_tx: TxHash,
    pub flags: Vec<AnomalyFlag>,
    /// (deposit - withdrawal) / deposit when deposit > 0, else 0. Negative
    /// when the withdrawal exceeds the deposit.
    pub fee_ratio: f64,
}

fn bridge_accounts(to_addr: Option<Address>) -> BTreeSet<Address> {
    let mut accounts = BTreeSet::new();
    accounts.insert(Address::ZERO);
    if let Some(to) = to_addr {
        accounts.insert(to);
    }
    accounts
}

/// Flags one pair. All threshold comparisons are exact integer arithmetic:
/// the 3% rule is `100 * (deposit - withdrawal) > 3 * deposit`.
pub fn flag_anomalies(
    store: &TxStore,
    src: (ChainId, TxHash),
    dst: (ChainId, TxHash),
) -> Result<AnomalyReport, PipelineError> {
    let dep = store.get(src.0, src.1).ok_or(PipelineError::UnknownTx(src.1, src.0))?;
    let wd = store.get(dst.0, dst.1).ok_or(PipelineError::UnknownTx(dst.1, dst.0))?;

    let dep_graph = build_transfer_graph(dep, store.abis());
    let wd_graph = build_transfer_graph(wd, store.abis());
    let deposit = dep_graph.inflow(&bridge_accounts(dep.to_addr));
    let withdrawal = wd_graph.outflow(&bridge_accounts(wd.to_addr));

    let mut flags = Vec::new();
    if deposit.is_zero() && !withdrawal.is_zero() {
        flags.push(AnomalyFlag::ZeroDeposit);
    }
    if withdrawal.0 > deposit.0 {
        flags.push(AnomalyFlag::WithdrawalExceedsDeposit);
    }
    if !deposit.is_zero() && withdrawal.0 <= deposit.0 {
        let fee = &deposit.0 - &withdrawal.0;
        if fee * BigUint::from(100u32) > &deposit.0 * BigUint::from(3u32) {
            flags.push(AnomalyFlag::FeeAbove3Pct);
        }
    }

    let fee_ratio = if deposit.is_zero() {
        0.0
    } else {
        (deposit.to_f64() - withdrawal.to_f64()) / deposit.to_f64()
    };
    Ok(AnomalyReport {
        src_chain: src.0,
        src_tx: src.1,
        dst_chain: dst.0,
        dst_tx: dst.1,
        flags,
        fee_ratio,
    })
}

/// Deposit-side transfer-graph total, exposed for reporting.
pub fn deposit_total(store: &TxStore, chain: ChainId, hash: TxHash) -> Option<Amount> {
    let tx = store.get(chain, hash)?;
    let graph = build_transfer_graph(tx, store.abis());
    Some(graph.inflow(&bridge_accounts(tx.to_addr)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_three_percent_is_not_flagged() {
        // 3% exactly: fee * 100 == deposit * 3.
        let deposit = BigUint::from(1_000_000u64);
        let fee = BigUint::from(30_000u64);
        assert!(!(&fee * BigUint::from(100u32) > &deposit * BigUint::from(3u32)));
        let fee_over = BigUint::from(30_001u64);
        assert!(&fee_over * BigUint::from(100u32) > &deposit * BigUint::from(3u32));
    }
}
