//! Money-flow graph over matched pairs: address-level nodes annotated with
//! their chain, on-chain edges from per-transaction transfer graphs, and
//! dashed cross-chain edges linking the bridge account to the beneficiary.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::trace::PipelineError;
use crate::identify::build_transfer_graph;
use crate::ledger::{Address, ChainId, TxHash, TxStore};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct FlowNode {
    pub chain: ChainId,
    pub address: Address,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EdgeKind {
    OnChain,
    CrossChain,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FlowEdge {
    pub from: usize,
    pub to: usize,
    pub amount_fraction: f64,
    pub kind: EdgeKind,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FlowGraph {
    pub nodes: Vec<FlowNode>,
    pub edges: Vec<FlowEdge>,
}

/// Builds the flow graph for matched pairs. Edge `amount_fraction` is the
/// edge amount over its source node's total outflow. Withdrawal-side edges
/// leaving the bridge accounts are folded into one cross-chain edge from
/// the source-side router to the beneficiary.
pub fn build_flow_graph(
    store: &TxStore,
    pairs: &[(ChainId, TxHash, ChainId, TxHash)],
) -> Result<FlowGraph, PipelineError> {
    if pairs.is_empty() {
        return Err(PipelineError::Data("no matched pairs to draw".into()));
    }
    // Aggregate absolute amounts per (from, to, kind).
    let mut amounts: BTreeMap<(FlowNode, FlowNode, bool), f64> = BTreeMap::new();
    let mut add = |from: FlowNode, to: FlowNode, amount: f64, cross: bool| {
        if amount > 0.0 {
            *amounts.entry((from, to, cross)).or_default() += amount;
        }
    };

    for &(src_chain, src_tx, dst_chain, dst_tx) in pairs {
        let dep = store
            .get(src_chain, src_tx)
            .ok_or(PipelineError::UnknownTx(src_tx, src_chain))?;
        let wd = store
            .get(dst_chain, dst_tx)
            .ok_or(PipelineError::UnknownTx(dst_tx, dst_chain))?;

        for edge in &build_transfer_graph(dep, store.abis()).edges {
            add(
                FlowNode { chain: src_chain, address: edge.from },
                FlowNode { chain: src_chain, address: edge.to },
                edge.amount.to_f64(),
                false,
            );
        }

        let mut bridge_accounts = vec![Address::ZERO];
        if let Some(to) = wd.to_addr {
            bridge_accounts.push(to);
        }
        let mut out_total = 0.0f64;
        let mut beneficiary: Option<(Address, f64)> = None;
        for edge in &build_transfer_graph(wd, store.abis()).edges {
            let from_bridge = bridge_accounts.contains(&edge.from);
            let to_bridge = bridge_accounts.contains(&edge.to);
            if from_bridge && !to_bridge {
                let amount = edge.amount.to_f64();
                out_total += amount;
                match &mut beneficiary {
                    Some((_, best)) if *best >= amount => {}
                    _ => beneficiary = Some((edge.to, amount)),
                }
            } else if !from_bridge {
                add(
                    FlowNode { chain: dst_chain, address: edge.from },
                    FlowNode { chain: dst_chain, address: edge.to },
                    edge.amount.to_f64(),
                    false,
                );
            }
        }
        if let (Some((who, _)), true) = (beneficiary, out_total > 0.0) {
            let bridge_src = dep.to_addr.unwrap_or(dep.from_addr);
            add(
                FlowNode { chain: src_chain, address: bridge_src },
                FlowNode { chain: dst_chain, address: who },
                out_total,
                true,
            );
        }
    }

    let mut nodes: Vec<FlowNode> = amounts
        .keys()
        .flat_map(|(from, to, _)| [*from, *to])
        .collect();
    nodes.sort();
    nodes.dedup();
    let index: BTreeMap<FlowNode, usize> =
        nodes.iter().enumerate().map(|(i, n)| (*n, i)).collect();

    let mut outflow: BTreeMap<FlowNode, f64> = BTreeMap::new();
    for ((from, _, _), amount) in &amounts {
        *outflow.entry(*from).or_default() += amount;
    }
    let edges = amounts
        .iter()
        .map(|((from, to, cross), amount)| FlowEdge {
            from: index[from],
            to: index[to],
            amount_fraction: amount / outflow[from],
            kind: if *cross { EdgeKind::CrossChain } else { EdgeKind::OnChain },
        })
        .collect();
    Ok(FlowGraph { nodes, edges })
}

impl FlowGraph {
    /// DOT rendering; cross-chain edges are dashed, labels carry the
    /// outflow fraction.
    pub fn to_dot(&self) -> String {
        let mut out = String::from("digraph money_flow {\n  rankdir=LR;\n  node [shape=box];\n");
        let short = |a: &Address| {
            let hex = a.to_hex();
            format!("{}..{}", &hex[..8], &hex[hex.len() - 4..])
        };
        for (i, node) in self.nodes.iter().enumerate() {
            out.push_str(&format!(
                "  n{} [label=\"chain {}\\n{}\"];\n",
                i,
                node.chain,
                short(&node.address)
            ));
        }
        for edge in &self.edges {
            let style = match edge.kind {
                EdgeKind::OnChain => "solid",
                EdgeKind::CrossChain => "dashed",
            };
            out.push_str(&format!(
                "  n{} -> n{} [label=\"{:.3}\", style={}];\n",
                edge.from, edge.to, edge.amount_fraction, style
            ));
        }
        out.push_str("}\n");
        out
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("flow graph serializes")
    }

    /// Sum of outgoing fractions per node; for any node with outflow this
    /// is 1 by construction.
    pub fn outgoing_fraction_sums(&self) -> Vec<f64> {
        let mut sums = vec![0.0; self.nodes.len()];
        for e in &self.edges {
            sums[e.from] += e.amount_fraction;
        }
        sums
    }
}
