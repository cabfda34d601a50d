//! Fixed 16-dimensional statistical encoding of the transfer graph.
//! Label-free: invariant under address renaming and edge reordering.

use std::collections::{BTreeMap, BTreeSet};

use super::graph::{EdgeOrigin, TransferGraph};
use crate::ledger::{Address, TokenRef};

pub const ASSET_DIM: usize = 16;
const CLAMP_MAX: f64 = 50.0;

/// Statistic order:
///  0 ln(1+nodes)                 8 zero-amount edge count
///  1 ln(1+edges)                 9 ln(1+internal transfer count)
///  2 ln(1+distinct tokens)      10 distinct senders
///  3 ln(1+native value / 1e18)  11 distinct receivers
///  4 ln(1+token-event count)    12 self-transfer flag
///  5 max out-degree             13 burn-to-zero-address flag
///  6 max in-degree              14 mint-from-zero-address flag
///  7 mean degree                15 normalized entropy of edge amounts
pub fn encode_asset_semantics(g: &TransferGraph) -> [f64; ASSET_DIM] {
    let mut v = [0.0f64; ASSET_DIM];
    if g.nodes.is_empty() && g.edges.is_empty() {
        return v;
    }
    let ln1p = |x: f64| (1.0 + x).ln();

    v[0] = ln1p(g.nodes.len() as f64);
    v[1] = ln1p(g.edges.len() as f64);

    let tokens: BTreeSet<TokenRef> = g.edges.iter().map(|e| e.token).collect();
    v[2] = ln1p(tokens.len() as f64);

    let native_units: f64 = g
        .edges
        .iter()
        .filter(|e| e.token == TokenRef::Native)
        .map(|e| e.amount.to_f64() / 1e18)
        .sum();
    v[3] = ln1p(native_units);

    v[4] = ln1p(g.edges.iter().filter(|e| e.origin == EdgeOrigin::Event).count() as f64);

    let mut out_deg: BTreeMap<Address, usize> = BTreeMap::new();
    let mut in_deg: BTreeMap<Address, usize> = BTreeMap::new();
    for e in &g.edges {
        *out_deg.entry(e.from).or_default() += 1;
        *in_deg.entry(e.to).or_default() += 1;
    }
    v[5] = out_deg.values().copied().max().unwrap_or(0) as f64;
    v[6] = in_deg.values().copied().max().unwrap_or(0) as f64;
    v[7] = if g.nodes.is_empty() {
        0.0
    } else {
        2.0 * g.edges.len() as f64 / g.nodes.len() as f64
    };

    v[8] = g.edges.iter().filter(|e| e.amount.is_zero()).count() as f64;
    v[9] = ln1p(g.edges.iter().filter(|e| e.origin == EdgeOrigin::Internal).count() as f64);
    v[10] = out_deg.len() as f64;
    v[11] = in_deg.len() as f64;
    v[12] = if g.edges.iter().any(|e| e.from == e.to) { 1.0 } else { 0.0 };
    v[13] = if g.edges.iter().any(|e| e.to == Address::ZERO) { 1.0 } else { 0.0 };
    v[14] = if g.edges.iter().any(|e| e.from == Address::ZERO) { 1.0 } else { 0.0 };

    let amounts: Vec<f64> =
        g.edges.iter().map(|e| e.amount.to_f64()).filter(|a| *a > 0.0).collect();
    v[15] = if amounts.len() >= 2 {
        let total: f64 = amounts.iter().sum();
        let h: f64 = amounts
            .iter()
            .map(|a| {
                let p = a / total;
                -p * p.ln()
            })
            .sum();
        h / (amounts.len() as f64).ln()
    } else {
        0.0
    };

    for x in &mut v {
        *x = x.clamp(0.0, CLAMP_MAX);
    }
    v
}

#[cfg(test)]
mod tests {
    use super::super::graph::{build_transfer_graph, TransferGraph};
    use super::*;
    use crate::ledger::{
        AbiRegistry, Amount, ChainId, HexBytes, Transaction, TxStatus, B256,
    };

    #[test]
    fn empty_graph_is_all_zero() {
        let g = TransferGraph::default();
        assert_eq!(encode_asset_semantics(&g), [0.0; 16]);
    }

    #[test]
    fn single_native_edge_positions_hand_computed() {
        // Amount (e-1) * 1e18, so the native-value statistic is exactly 1.
        let amount = ((std::f64::consts::E - 1.0) * 1e18) as u128;
        let tx = Transaction {
            chain: ChainId(1),
            tx_hash: B256([2; 32]),
            block_number: 1,
            timestamp: 5,
            from_addr: crate::ledger::Address([0x0a; 20]),
            to_addr: Some(crate::ledger::Address([0x0b; 20])),
            value: Amount::from_u128(amount),
            input_data: HexBytes(vec![]),
            status: TxStatus::Success,
            logs: vec![],
            internal_transfers: vec![],
        };
        let g = build_transfer_graph(&tx, &AbiRegistry::new());
        let v = encode_asset_semantics(&g);
        assert!((v[0] - 3.0f64.ln()).abs() < 1e-12, "node stat");
        assert!((v[1] - 2.0f64.ln()).abs() < 1e-12, "edge stat");
        assert!((v[3] - 1.0).abs() < 1e-9, "value stat");
        assert_eq!(v[5], 1.0);
        assert_eq!(v[7], 1.0);
        assert_eq!(v[15], 0.0);
    }

    #[test]
    fn invariant_under_address_renaming() {
        let mk = |a: u8, b: u8| {
            let tx = Transaction {
                chain: ChainId(1),
                tx_hash: B256([3; 32]),
                block_number: 1,
                timestamp: 5,
                from_addr: crate::ledger::Address([a; 20]),
                to_addr: Some(crate::ledger::Address([b; 20])),
                value: Amount::from(123u64),
                input_data: HexBytes(vec![]),
                status: TxStatus::Success,
                logs: vec![],
                internal_transfers: vec![],
            };
            build_transfer_graph(&tx, &AbiRegistry::new())
        };
        assert_eq!(encode_asset_semantics(&mk(0x11, 0x22)), encode_asset_semantics(&mk(0x77, 0x99)));
    }
}
