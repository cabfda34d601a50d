//! Per-transaction asset transfer graph.

use std::collections::BTreeSet;

use crate::ledger::{
    is_token_transfer, AbiRegistry, Address, Amount, TokenRef, Transaction, TypedValue,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EdgeOrigin {
    /// Top-level native value transfer.
    Native,
    /// Internal (contract-triggered) transfer.
    Internal,
    /// Decoded ERC-20-style Transfer event.
    Event,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TransferEdge {
    pub from: Address,
    pub to: Address,
    pub token: TokenRef,
    pub amount: Amount,
    pub origin: EdgeOrigin,
}

/// Asset movements of a single transaction. Zero-amount edges are retained:
/// they are the signature of zero-deposit attacks.
#[derive(Debug, Clone, Default)]
pub struct TransferGraph {
    pub nodes: BTreeSet<Address>,
    pub edges: Vec<TransferEdge>,
}

impl TransferGraph {
    fn push(&mut self, edge: TransferEdge) {
        self.nodes.insert(edge.from);
        self.nodes.insert(edge.to);
        self.edges.push(edge);
    }

    /// Sum of edge amounts into any of `accounts` from outside them.
    pub fn inflow(&self, accounts: &BTreeSet<Address>) -> Amount {
        let mut total = Amount::zero();
        for e in &self.edges {
            if accounts.contains(&e.to) && !accounts.contains(&e.from) {
                total = Amount(total.0 + &e.amount.0);
            }
        }
        total
    }

    /// Sum of edge amounts out of any of `accounts` to outside them.
    pub fn outflow(&self, accounts: &BTreeSet<Address>) -> Amount {
        let mut total = Amount::zero();
        for e in &self.edges {
            if accounts.contains(&e.from) && !accounts.contains(&e.to) {
                total = Amount(total.0 + &e.amount.0);
            }
        }
        total
    }
}

/// One edge per native value transfer, internal transfer, and decoded
/// token Transfer event.
pub fn build_transfer_graph(tx: &Transaction, abis: &AbiRegistry) -> TransferGraph {
    let mut graph = TransferGraph::default();
    if let Some(to) = tx.to_addr {
        graph.push(TransferEdge {
            from: tx.from_addr,
            to,
            token: TokenRef::Native,
            amount: tx.value.clone(),
            origin: EdgeOrigin::Native,
        });
    }
    for t in &tx.internal_transfers {
        graph.push(TransferEdge {
            from: t.from,
            to: t.to,
            token: t.token,
            amount: t.amount.clone(),
            origin: EdgeOrigin::Internal,
        });
    }
    for log in &tx.logs {
        let Some(decl) = abis.decl_for(log) else { continue };
        if !is_token_transfer(decl) {
            continue;
        }
        let Ok(ev) = crate::ledger::decode_event(log, decl) else { continue };
        let (from, to, amount) = match (&ev.pairs[0].value, &ev.pairs[1].value, &ev.pairs[2].value)
        {
            (TypedValue::Address(f), TypedValue::Address(t), TypedValue::Numeric(a)) => {
                (*f, *t, a.clone())
            }
            _ => continue,
        };
        graph.push(TransferEdge {
            from,
            to,
            token: TokenRef::Token(log.emitter),
            amount,
            origin: EdgeOrigin::Event,
        });
    }
    graph
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ledger::{encode_event, parse_event_signature, ChainId, HexBytes, TxStatus, B256};

    fn plain_tx(value: u64) -> Transaction {
        Transaction {
            chain: ChainId(1),
            tx_hash: B256([1; 32]),
            block_number: 1,
            timestamp: 10,
            from_addr: Address([0xaa; 20]),
            to_addr: Some(Address([0xbb; 20])),
            value: Amount::from(value),
            input_data: HexBytes(vec![]),
            status: TxStatus::Success,
            logs: vec![],
            internal_transfers: vec![],
        }
    }

    #[test]
    fn plain_transfer_is_two_nodes_one_edge() {
        let g = build_transfer_graph(&plain_tx(5), &AbiRegistry::new());
        assert_eq!(g.nodes.len(), 2);
        assert_eq!(g.edges.len(), 1);
        assert_eq!(g.edges[0].origin, EdgeOrigin::Native);
    }

    #[test]
    fn zero_value_edge_is_retained() {
        let g = build_transfer_graph(&plain_tx(0), &AbiRegistry::new());
        assert_eq!(g.edges.len(), 1);
        assert!(g.edges[0].amount.is_zero());
        assert!(!g.edges.iter().any(|e| !e.amount.is_zero()));
    }

    #[test]
    fn token_transfer_events_become_edges() {
        let decl = parse_event_signature(
            "Transfer (index_topic_1 address from, index_topic_2 address to, uint256 value)",
        )
        .unwrap();
        let token = Address([0xcc; 20]);
        let mut abis = AbiRegistry::new();
        abis.register(token, decl.clone());
        let mut tx = plain_tx(0);
        tx.logs.push(
            encode_event(
                &decl,
                token,
                &[
                    TypedValue::Address(Address([0x01; 20])),
                    TypedValue::Address(Address([0x02; 20])),
                    TypedValue::Numeric(Amount::from(777u64)),
                ],
            )
            .unwrap(),
        );
        let g = build_transfer_graph(&tx, &abis);
        assert_eq!(g.edges.len(), 2);
        let ev_edge = g.edges.iter().find(|e| e.origin == EdgeOrigin::Event).unwrap();
        assert_eq!(ev_edge.amount, Amount::from(777u64));
        assert_eq!(ev_edge.token, TokenRef::Token(token));
    }
}
