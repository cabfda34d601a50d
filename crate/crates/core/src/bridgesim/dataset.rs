//! Labeled dataset produced by the simulator: the transaction store plus
//! ground-truth pairs, gold NER annotations, and train/valid/test splits.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::AttackKind;
use crate::ledger::{
    load_store_dir, save_store_dir, ChainId, LedgerError, TxHash, TxStore,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Valid,
    Test,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairLabel {
    pub src_chain: ChainId,
    pub src_tx: TxHash,
    pub dst_chain: ChainId,
    pub dst_tx: TxHash,
    pub bridge: String,
    pub is_attack: bool,
    pub attack_kind: Option<AttackKind>,
}

/// Gold token tags for one event declaration. `bridge` records provenance
/// for bridge-held-out experiments and is not part of the file format.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NerAnnotation {
    pub signature: String,
    pub tags: Vec<String>,
    #[serde(skip_serializing, default)]
    pub bridge: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct SplitRecord {
    chain_id: ChainId,
    tx_hash: TxHash,
    split: Split,
}

#[derive(Debug)]
pub struct LabeledDataset {
    pub store: TxStore,
    pub pairs: Vec<PairLabel>,
    pub ner_annotations: Vec<NerAnnotation>,
    pub splits: BTreeMap<(ChainId, TxHash), Split>,
}

impl LabeledDataset {
    pub fn split_of(&self, chain: ChainId, hash: TxHash) -> Option<Split> {
        self.splits.get(&(chain, hash)).copied()
    }

    /// Checks referential integrity and pair ordering; used by tests and
    /// after loading.
    pub fn validate(&self) -> Result<(), LedgerError> {
        for pair in &self.pairs {
            let src = self
                .store
                .get(pair.src_chain, pair.src_tx)
                .ok_or(LedgerError::UnknownTx(pair.src_tx, pair.src_chain))?;
            let dst = self
                .store
                .get(pair.dst_chain, pair.dst_tx)
                .ok_or(LedgerError::UnknownTx(pair.dst_tx, pair.dst_chain))?;
            if src.timestamp >= dst.timestamp {
                return Err(LedgerError::InvalidRecord(format!(
                    "pair {}: deposit not earlier than withdrawal",
                    pair.src_tx
                )));
            }
        }
        Ok(())
    }

    /// Writes the dataset directory: `chains/`, `abis/`, `labels/pairs.jsonl`,
    /// `labels/splits.jsonl`, `ner/annotations.jsonl`.
    pub fn save_dir(&self, dir: &Path) -> Result<(), LedgerError> {
        save_store_dir(dir, &self.store)?;
        let labels = dir.join("labels");
        fs::create_dir_all(&labels)?;
        let mut pairs_file = fs::File::create(labels.join("pairs.jsonl"))?;
        for pair in &self.pairs {
            serde_json::to_writer(&mut pairs_file, pair)?;
            pairs_file.write_all(b"\n")?;
        }
        let mut splits_file = fs::File::create(labels.join("splits.jsonl"))?;
        for ((chain_id, tx_hash), split) in &self.splits {
            let record = SplitRecord { chain_id: *chain_id, tx_hash: *tx_hash, split: *split };
            serde_json::to_writer(&mut splits_file, &record)?;
            splits_file.write_all(b"\n")?;
        }
        let ner = dir.join("ner");
        fs::create_dir_all(&ner)?;
        let mut ann_file = fs::File::create(ner.join("annotations.jsonl"))?;
        for ann in &self.ner_annotations {
            serde_json::to_writer(&mut ann_file, ann)?;
            ann_file.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn load_dir(dir: &Path) -> Result<Self, LedgerError> {
        let store = load_store_dir(dir)?;
        let mut pairs = Vec::new();
        for line in read_lines(&dir.join("labels").join("pairs.jsonl"))? {
            pairs.push(serde_json::from_str(&line)?);
        }
        let mut splits = BTreeMap::new();
        let splits_path = dir.join("labels").join("splits.jsonl");
        if splits_path.is_file() {
            for line in read_lines(&splits_path)? {
                let record: SplitRecord = serde_json::from_str(&line)?;
                splits.insert((record.chain_id, record.tx_hash), record.split);
            }
        }
        let mut ner_annotations = Vec::new();
        let ann_path = dir.join("ner").join("annotations.jsonl");
        if ann_path.is_file() {
            for line in read_lines(&ann_path)? {
                ner_annotations.push(serde_json::from_str(&line)?);
            }
        }
        let ds = LabeledDataset { store, pairs, ner_annotations, splits };
        ds.validate()?;
        Ok(ds)
    }
}

fn read_lines(path: &Path) -> Result<Vec<String>, LedgerError> {
    let reader = BufReader::new(fs::File::open(path)?);
    let mut out = Vec::new();
    for line in reader.lines() {
        let line = line?;
        if !line.trim().is_empty() {
            out.push(line);
        }
    }
    Ok(out)
}
