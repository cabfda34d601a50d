//! Indexed local transaction store standing in for chain explorers.
//!
//! The store is immutable after build: per-chain hash maps plus
//! (chain, address) indices sorted by (timestamp, block_number, tx_hash).
//! Loading is file-backed JSONL, one transaction object per line, with
//! event ABIs in sidecar JSON files keyed by emitter address.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use super::abi::{decode_event, parse_event_signature, signature_hash};
use super::error::LedgerError;
use super::types::{
    Address, AbiType, B256, ChainId, DecodedEvent, EventDecl, RawLog, Transaction, TxKey,
    TxStatus, TypedValue,
};

/// Event declarations known per emitting contract, indexed by topic0.
#[derive(Debug, Clone, Default)]
pub struct AbiRegistry {
    by_emitter: BTreeMap<Address, Vec<EventDecl>>,
    by_topic: BTreeMap<(Address, B256), usize>,
}

impl AbiRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn register(&mut self, emitter: Address, decl: EventDecl) {
        let topic = signature_hash(&decl);
        let decls = self.by_emitter.entry(emitter).or_default();
        if self.by_topic.contains_key(&(emitter, topic)) {
            return;
        }
        self.by_topic.insert((emitter, topic), decls.len());
        decls.push(decl);
    }

    pub fn decl_for(&self, log: &RawLog) -> Option<&EventDecl> {
        let topic0 = log.topics.first()?;
        let idx = self.by_topic.get(&(log.emitter, *topic0))?;
        Some(&self.by_emitter[&log.emitter][*idx])
    }

    pub fn declarations(&self) -> impl Iterator<Item = (&Address, &Vec<EventDecl>)> {
        self.by_emitter.iter()
    }

    /// Decodes every log of `tx` that has a registered declaration,
    /// preserving emission order.
    pub fn decode_tx(&self, tx: &Transaction) -> Vec<DecodedEvent> {
        tx.logs
            .iter()
            .filter_map(|log| {
                let decl = self.decl_for(log)?;
                decode_event(log, decl).ok()
            })
            .collect()
    }

    /// Like `decode_tx` but keeps the declaration alongside each event.
    pub fn decode_tx_with_decls<'a>(
        &'a self,
        tx: &Transaction,
    ) -> Vec<(&'a EventDecl, DecodedEvent)> {
        tx.logs
            .iter()
            .filter_map(|log| {
                let decl = self.decl_for(log)?;
                Some((decl, decode_event(log, decl).ok()?))
            })
            .collect()
    }
}

/// True when the declaration has the canonical ERC-20 Transfer shape:
/// name `Transfer` with two leading address parameters and a numeric one.
pub fn is_token_transfer(decl: &EventDecl) -> bool {
    decl.name == "Transfer"
        && decl.params.len() == 3
        && decl.params[0].abi_type == AbiType::Address
        && decl.params[1].abi_type == AbiType::Address
        && matches!(decl.params[2].abi_type, AbiType::Uint(_))
}

#[derive(Debug, Default)]
pub struct TxStore {
    chains: BTreeSet<ChainId>,
    txs: BTreeMap<(ChainId, B256), Transaction>,
    addr_index: BTreeMap<(ChainId, Address), Vec<TxKey>>,
    chain_index: BTreeMap<ChainId, Vec<TxKey>>,
    abis: AbiRegistry,
}

impl TxStore {
    /// Builds the store and its indices. Validates hash uniqueness and
    /// that timestamps are non-decreasing in block number within a chain.
    pub fn build(
        chains: Vec<ChainId>,
        txs: Vec<Transaction>,
        abis: AbiRegistry,
    ) -> Result<Self, LedgerError> {
        let mut store = TxStore {
            chains: chains.into_iter().collect(),
            abis,
            ..Default::default()
        };
        for tx in txs {
            store.chains.insert(tx.chain);
            let key = (tx.chain, tx.tx_hash);
            if store.txs.contains_key(&key) {
                return Err(LedgerError::InvalidRecord(format!(
                    "duplicate tx hash {} on chain {}",
                    tx.tx_hash, tx.chain
                )));
            }
            store.txs.insert(key, tx);
        }
        store.rebuild_indices()?;
        Ok(store)
    }

    fn rebuild_indices(&mut self) -> Result<(), LedgerError> {
        self.addr_index.clear();
        self.chain_index.clear();

        let mut per_chain: BTreeMap<ChainId, Vec<(u64, u64)>> = BTreeMap::new();
        let mut entries: Vec<(ChainId, Address, TxKey)> = Vec::new();
        for tx in self.txs.values() {
            per_chain
                .entry(tx.chain)
                .or_default()
                .push((tx.block_number, tx.timestamp));
            let key = tx.key();
            let mut endpoints = tx.base_endpoints();
            for event in self.abis.decode_tx_with_decls(tx) {
                let (decl, decoded) = event;
                if is_token_transfer(decl) {
                    for pair in decoded.pairs.iter().take(2) {
                        if let TypedValue::Address(a) = pair.value {
                            endpoints.push(a);
                        }
                    }
                }
            }
            endpoints.sort();
            endpoints.dedup();
            for addr in endpoints {
                entries.push((tx.chain, addr, key));
            }
            self.chain_index.entry(tx.chain).or_default().push(key);
        }

        for (chain, blocks) in per_chain {
            let mut sorted = blocks;
            sorted.sort();
            for w in sorted.windows(2) {
                if w[1].1 < w[0].1 {
                    return Err(LedgerError::InvalidRecord(format!(
                        "chain {chain}: timestamp decreases from block {} to {}",
                        w[0].0, w[1].0
                    )));
                }
            }
        }

        for (chain, addr, key) in entries {
            self.addr_index.entry((chain, addr)).or_default().push(key);
        }
        for keys in self.addr_index.values_mut() {
            keys.sort();
            keys.dedup();
        }
        for keys in self.chain_index.values_mut() {
            keys.sort();
        }
        Ok(())
    }

    pub fn abis(&self) -> &AbiRegistry {
        &self.abis
    }

    pub fn chains(&self) -> impl Iterator<Item = ChainId> + '_ {
        self.chains.iter().copied()
    }

    pub fn has_chain(&self, chain: ChainId) -> bool {
        self.chains.contains(&chain)
    }

    pub fn len(&self) -> usize {
        self.txs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.txs.is_empty()
    }

    pub fn get(&self, chain: ChainId, hash: B256) -> Option<&Transaction> {
        self.txs.get(&(chain, hash))
    }

    pub fn transactions(&self) -> impl Iterator<Item = &Transaction> {
        self.txs.values()
    }

    /// All transactions on `chain` in (timestamp, block, hash) order.
    pub fn chain_transactions(&self, chain: ChainId) -> impl Iterator<Item = &Transaction> {
        self.chain_index
            .get(&chain)
            .into_iter()
            .flatten()
            .map(move |k| &self.txs[&(chain, k.tx_hash)])
    }

    /// All and only transactions on `chain` where `address` is sender,
    /// recipient, or a transfer endpoint, with `t_lo <= timestamp <= t_hi`,
    /// sorted by (timestamp, block_number, tx_hash).
    pub fn query_transactions(
        &self,
        chain: ChainId,
        address: Address,
        t_lo: u64,
        t_hi: u64,
    ) -> Result<Vec<&Transaction>, LedgerError> {
        if !self.has_chain(chain) {
            return Err(LedgerError::UnknownChain(chain));
        }
        let Some(keys) = self.addr_index.get(&(chain, address)) else {
            return Ok(Vec::new());
        };
        let lo = keys.partition_point(|k| k.timestamp < t_lo);
        let hi = keys.partition_point(|k| k.timestamp <= t_hi);
        Ok(keys[lo..hi]
            .iter()
            .map(|k| &self.txs[&(chain, k.tx_hash)])
            .collect())
    }
}

/// Writes transactions as JSONL under `dir/chains/<chain_id>.jsonl` and the
/// ABI registry under `dir/abis/<emitter>.json` (a JSON list of signature
/// strings). Line order within a chain file is (timestamp, block, hash).
pub fn save_store_dir(dir: &Path, store: &TxStore) -> Result<(), LedgerError> {
    let chains_dir = dir.join("chains");
    fs::create_dir_all(&chains_dir)?;
    for chain in store.chains() {
        let mut file = fs::File::create(chains_dir.join(format!("{}.jsonl", chain.0)))?;
        for tx in store.chain_transactions(chain) {
            serde_json::to_writer(&mut file, tx)?;
            file.write_all(b"\n")?;
        }
    }
    let abis_dir = dir.join("abis");
    fs::create_dir_all(&abis_dir)?;
    for (emitter, decls) in store.abis().declarations() {
        let sigs: Vec<String> = decls.iter().map(declaration_text).collect();
        let mut file = fs::File::create(abis_dir.join(format!("{}.json", emitter.to_hex())))?;
        serde_json::to_writer_pretty(&mut file, &sigs)?;
        file.write_all(b"\n")?;
    }
    Ok(())
}

/// Renders a declaration back to the textual form `parse_event_signature`
/// accepts, with `index_topic_K` markers in topic order.
pub fn declaration_text(decl: &EventDecl) -> String {
    let mut topic = 0;
    let params: Vec<String> = decl
        .params
        .iter()
        .map(|p| {
            if p.indexed {
                topic += 1;
                format!("index_topic_{} {} {}", topic, p.abi_type.canonical(), p.name)
            } else {
                format!("{} {}", p.abi_type.canonical(), p.name)
            }
        })
        .collect();
    format!("{} ({})", decl.name, params.join(", "))
}

/// Loads a dataset directory written by `save_store_dir`.
pub fn load_store_dir(dir: &Path) -> Result<TxStore, LedgerError> {
    let mut abis = AbiRegistry::new();
    let abis_dir = dir.join("abis");
    if abis_dir.is_dir() {
        let mut paths: Vec<_> = fs::read_dir(&abis_dir)?
            .collect::<Result<Vec<_>, _>>()?
            .into_iter()
            .map(|e| e.path())
            .collect();
        paths.sort();
        for path in paths {
            let Some(stem) = path.file_stem().and_then(|s| s.to_str()) else {
                continue;
            };
            let emitter = Address::from_hex(stem)?;
            let sigs: Vec<String> = serde_json::from_str(&fs::read_to_string(&path)?)?;
            for sig in sigs {
                abis.register(emitter, parse_event_signature(&sig)?);
            }
        }
    }

    let chains_dir = dir.join("chains");
    let mut chains = Vec::new();
    let mut txs = Vec::new();
    let mut paths: Vec<_> = fs::read_dir(&chains_dir)?
        .collect::<Result<Vec<_>, _>>()?
        .into_iter()
        .map(|e| e.path())
        .collect();
    paths.sort();
    for path in paths {
        let Some(stem) = path.file_stem().and_then(|s| s.to_str()) else {
            continue;
        };
        let chain = ChainId(stem.parse().map_err(|_| {
            LedgerError::InvalidRecord(format!("bad chain file name {}", path.display()))
        })?);
        chains.push(chain);
        let reader = BufReader::new(fs::File::open(&path)?);
        for line in reader.lines() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let tx: Transaction = serde_json::from_str(&line)?;
            if tx.chain != chain {
                return Err(LedgerError::InvalidRecord(format!(
                    "tx {} claims chain {} but lives in {}",
                    tx.tx_hash,
                    tx.chain,
                    path.display()
                )));
            }
            txs.push(tx);
        }
    }
    TxStore::build(chains, txs, abis)
}

/// Convenience predicate used by candidate retrieval: failed transactions
/// never enter candidate sets.
pub fn is_traceable(tx: &Transaction) -> bool {
    tx.status == TxStatus::Success
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ledger::types::{Amount, HexBytes, InternalTransfer, TokenRef};

    fn tx(chain: u64, hash: u8, ts: u64, block: u64, from: u8, to: u8) -> Transaction {
        Transaction {
            chain: ChainId(chain),
            tx_hash: B256([hash; 32]),
            block_number: block,
            timestamp: ts,
            from_addr: Address([from; 20]),
            to_addr: Some(Address([to; 20])),
            value: Amount::from(10u64),
            input_data: HexBytes(vec![]),
            status: TxStatus::Success,
            logs: vec![],
            internal_transfers: vec![],
        }
    }

    #[test]
    fn query_empty_instant_window() {
        let store = TxStore::build(
            vec![ChainId(1)],
            vec![tx(1, 1, 100, 5, 0xaa, 0xbb)],
            AbiRegistry::new(),
        )
        .unwrap();
        let hits = store
            .query_transactions(ChainId(1), Address([0xaa; 20]), 50, 50)
            .unwrap();
        assert!(hits.is_empty());
    }

    #[test]
    fn query_full_history_equals_linear_scan() {
        let txs = vec![
            tx(1, 1, 100, 5, 0xaa, 0xbb),
            tx(1, 2, 90, 4, 0xaa, 0xcc),
            tx(1, 3, 100, 5, 0xdd, 0xaa),
            tx(1, 4, 120, 6, 0xee, 0xff),
        ];
        let store = TxStore::build(vec![ChainId(1)], txs.clone(), AbiRegistry::new()).unwrap();
        let hits = store
            .query_transactions(ChainId(1), Address([0xaa; 20]), 0, u64::MAX)
            .unwrap();
        let mut expected: Vec<&Transaction> = txs
            .iter()
            .filter(|t| t.base_endpoints().contains(&Address([0xaa; 20])))
            .collect();
        expected.sort_by_key(|t| t.key());
        assert_eq!(hits.len(), 3);
        assert_eq!(
            hits.iter().map(|t| t.tx_hash).collect::<Vec<_>>(),
            expected.iter().map(|t| t.tx_hash).collect::<Vec<_>>()
        );
    }

    #[test]
    fn unknown_chain_is_an_error() {
        let store = TxStore::build(vec![ChainId(1)], vec![], AbiRegistry::new()).unwrap();
        assert!(matches!(
            store.query_transactions(ChainId(9), Address::ZERO, 0, 1),
            Err(LedgerError::UnknownChain(ChainId(9)))
        ));
    }

    #[test]
    fn internal_transfer_endpoints_are_indexed() {
        let mut t = tx(1, 1, 100, 5, 0xaa, 0xbb);
        t.internal_transfers.push(InternalTransfer {
            from: Address([0x11; 20]),
            to: Address([0x22; 20]),
            token: TokenRef::Native,
            amount: Amount::from(1u64),
        });
        let store = TxStore::build(vec![ChainId(1)], vec![t], AbiRegistry::new()).unwrap();
        let hits = store
            .query_transactions(ChainId(1), Address([0x22; 20]), 0, u64::MAX)
            .unwrap();
        assert_eq!(hits.len(), 1);
    }

    #[test]
    fn duplicate_hash_rejected() {
        let r = TxStore::build(
            vec![ChainId(1)],
            vec![tx(1, 1, 100, 5, 0xaa, 0xbb), tx(1, 1, 101, 6, 0xcc, 0xdd)],
            AbiRegistry::new(),
        );
        assert!(r.is_err());
    }

    #[test]
    fn decreasing_timestamp_across_blocks_rejected() {
        let r = TxStore::build(
            vec![ChainId(1)],
            vec![tx(1, 1, 100, 5, 0xaa, 0xbb), tx(1, 2, 90, 6, 0xcc, 0xdd)],
            AbiRegistry::new(),
        );
        assert!(r.is_err());
    }
}
