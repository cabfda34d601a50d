//! Three-way transaction classifier fusing transfer-graph statistics with
//! event-name text semantics.

use std::collections::BTreeMap;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use super::features::{encode_asset_semantics, ASSET_DIM};
use super::graph::build_transfer_graph;
use crate::bridgesim::{LabeledDataset, Split};
use crate::ledger::{tokenize_identifier, ChainId, Transaction, TxHash, TxStore};
use crate::nn::dense::{Activation, Dense, Mlp};
use crate::nn::tensor::{collect_params, join_name, restore_params, zero_grads, ParamVisit, Tensor};
use crate::nn::{softmax, softmax_cross_entropy, Adam, AdamConfig, Checkpoint, Embedding, NnError};
use crate::train::TrainError;

pub const MSG_DIM: usize = 16;
pub const FUSED_DIM: usize = ASSET_DIM + MSG_DIM;

/// Classification outcome. Argmax ties break toward the earlier variant,
/// so exact ties fall back to non-cross-chain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum TxLabel {
    NonCrossChain,
    Deposit,
    Withdrawal,
}

impl TxLabel {
    pub const ALL: [TxLabel; 3] = [TxLabel::NonCrossChain, TxLabel::Deposit, TxLabel::Withdrawal];

    pub fn index(self) -> usize {
        match self {
            TxLabel::NonCrossChain => 0,
            TxLabel::Deposit => 1,
            TxLabel::Withdrawal => 2,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IdentifyHyper {
    pub buckets: usize,
    pub emb_dim: usize,
    pub msg_hidden: usize,
    pub epochs: usize,
    pub patience: usize,
    pub lr: f64,
    pub seed: u64,
}

impl Default for IdentifyHyper {
    fn default() -> Self {
        IdentifyHyper {
            buckets: 4096,
            emb_dim: 32,
            msg_hidden: 64,
            epochs: 120,
            patience: 15,
            lr: 1e-3,
            seed: 7,
        }
    }
}

#[derive(Debug)]
pub struct IdentifyModel {
    pub hyper: IdentifyHyper,
    emb: Embedding,
    msg_mlp: Mlp,
    head: Dense,
}

impl ParamVisit for IdentifyModel {
    fn visit_params(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut Tensor, &mut Tensor)) {
        self.emb.visit_params(&join_name(prefix, "emb"), f);
        self.msg_mlp.visit_params(&join_name(prefix, "msg_mlp"), f);
        self.head.visit_params(&join_name(prefix, "head"), f);
    }
}

impl IdentifyModel {
    pub fn new(hyper: IdentifyHyper) -> Self {
        let mut rng = ChaCha20Rng::seed_from_u64(hyper.seed);
        IdentifyModel {
            emb: Embedding::new(hyper.buckets, hyper.emb_dim, &mut rng),
            msg_mlp: Mlp::new(hyper.emb_dim, hyper.msg_hidden, MSG_DIM, &mut rng),
            head: Dense::new(FUSED_DIM, 3, Activation::Identity, &mut rng),
            hyper,
        }
    }

    /// Token bucket ids of all event names, order-preserving.
    pub fn message_token_ids(&self, event_names: &[String]) -> Vec<usize> {
        event_names
            .iter()
            .flat_map(|name| tokenize_identifier(name))
            .map(|t| self.emb.bucket(t.as_bytes()))
            .collect()
    }

    /// Mean-pooled token embeddings through the message MLP; the defined
    /// empty case is the MLP applied to a zero vector.
    pub fn encode_message_semantics(&self, event_names: &[String]) -> Result<Vec<f64>, NnError> {
        let ids = self.message_token_ids(event_names);
        self.msg_mlp.forward(&self.emb.mean_pool(&ids))
    }

    fn logits(&self, asset: &[f64; ASSET_DIM], token_ids: &[usize]) -> Result<Vec<f64>, NnError> {
        let msg = self.msg_mlp.forward(&self.emb.mean_pool(token_ids))?;
        let mut fused = asset.to_vec();
        fused.extend(msg);
        self.head.forward(&fused)
    }

    pub fn classify_features(
        &self,
        asset: &[f64; ASSET_DIM],
        token_ids: &[usize],
    ) -> Result<(TxLabel, [f64; 3]), NnError> {
        let logits = self.logits(asset, token_ids)?;
        let probs = softmax(&logits);
        let mut best = TxLabel::NonCrossChain;
        let mut best_p = f64::NEG_INFINITY;
        for label in TxLabel::ALL {
            let p = probs[label.index()];
            if p > best_p {
                best_p = p;
                best = label;
            }
        }
        Ok((best, [probs[0], probs[1], probs[2]]))
    }

    pub fn classify_tx(
        &self,
        tx: &Transaction,
        store: &TxStore,
    ) -> Result<(TxLabel, [f64; 3]), NnError> {
        let (asset, ids) = extract_features(self, tx, store);
        self.classify_features(&asset, &ids)
    }

    pub fn save(&mut self, path: &Path) -> Result<(), NnError> {
        let hyper = serde_json::to_value(&self.hyper).expect("hyper serializes");
        Checkpoint::from_model("identify", hyper, self).save(path)
    }

    pub fn load(path: &Path) -> Result<Self, NnError> {
        let ckpt = Checkpoint::load(path)?;
        if ckpt.kind != "identify" {
            return Err(NnError::Checkpoint(format!(
                "expected identify checkpoint, found {:?}",
                ckpt.kind
            )));
        }
        let hyper: IdentifyHyper = serde_json::from_value(ckpt.hyper.clone())
            .map_err(|e| NnError::Checkpoint(format!("bad hyperparameters: {e}")))?;
        let mut model = IdentifyModel::new(hyper);
        ckpt.apply_to(&mut model)?;
        Ok(model)
    }
}

pub fn extract_features(
    model: &IdentifyModel,
    tx: &Transaction,
    store: &TxStore,
) -> ([f64; ASSET_DIM], Vec<usize>) {
    let graph = build_transfer_graph(tx, store.abis());
    let asset = encode_asset_semantics(&graph);
    let names: Vec<String> = store.abis().decode_tx(tx).into_iter().map(|e| e.name).collect();
    let ids = model.message_token_ids(&names);
    (asset, ids)
}

/// Macro-averaged F1 over the three classes.
pub fn macro_f1(golds: &[TxLabel], preds: &[TxLabel]) -> f64 {
    let mut f1_sum = 0.0;
    for class in TxLabel::ALL {
        let tp = golds
            .iter()
            .zip(preds)
            .filter(|(g, p)| **g == class && **p == class)
            .count() as f64;
        let fp = golds.iter().zip(preds).filter(|(g, p)| **g != class && **p == class).count()
            as f64;
        let fn_ = golds.iter().zip(preds).filter(|(g, p)| **g == class && **p != class).count()
            as f64;
        let precision = if tp + fp > 0.0 { tp / (tp + fp) } else { 0.0 };
        let recall = if tp + fn_ > 0.0 { tp / (tp + fn_) } else { 0.0 };
        f1_sum += if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
    }
    f1_sum / 3.0
}

pub fn gold_labels(ds: &LabeledDataset) -> BTreeMap<(ChainId, TxHash), TxLabel> {
    let mut labels: BTreeMap<(ChainId, TxHash), TxLabel> = ds
        .store
        .transactions()
        .map(|t| ((t.chain, t.tx_hash), TxLabel::NonCrossChain))
        .collect();
    for pair in &ds.pairs {
        labels.insert((pair.src_chain, pair.src_tx), TxLabel::Deposit);
        labels.insert((pair.dst_chain, pair.dst_tx), TxLabel::Withdrawal);
    }
    labels
}

/// Trains the classifier with per-example updates and early selection on
/// validation macro-F1. Deterministic given the seed.
pub fn train_identifier(
    ds: &LabeledDataset,
    hyper: IdentifyHyper,
) -> Result<IdentifyModel, TrainError> {
    let labels = gold_labels(ds);
    train_identifier_with_labels(ds, &labels, hyper)
}

/// Training entry point with an explicit label map (the label-shuffle null
/// model uses this).
pub fn train_identifier_with_labels(
    ds: &LabeledDataset,
    labels: &BTreeMap<(ChainId, TxHash), TxLabel>,
    hyper: IdentifyHyper,
) -> Result<IdentifyModel, TrainError> {
    let mut model = IdentifyModel::new(hyper.clone());

    let mut examples: Vec<([f64; ASSET_DIM], Vec<usize>, TxLabel, Split)> = Vec::new();
    let mut txs: Vec<&Transaction> = ds.store.transactions().collect();
    txs.sort_by_key(|t| (t.chain, t.key()));
    for tx in txs {
        let Some(split) = ds.split_of(tx.chain, tx.tx_hash) else { continue };
        let (asset, ids) = extract_features(&model, tx, &ds.store);
        examples.push((asset, ids, labels[&(tx.chain, tx.tx_hash)], split));
    }
    let train_idx: Vec<usize> = examples
        .iter()
        .enumerate()
        .filter(|(_, e)| e.3 == Split::Train)
        .map(|(i, _)| i)
        .collect();
    let valid_idx: Vec<usize> = examples
        .iter()
        .enumerate()
        .filter(|(_, e)| e.3 == Split::Valid)
        .map(|(i, _)| i)
        .collect();
    if train_idx.is_empty() || valid_idx.is_empty() {
        return Err(TrainError::Data("empty train or valid split".into()));
    }

    let mut rng = ChaCha20Rng::seed_from_u64(hyper.seed ^ 0x1de_0f1e);
    let mut adam = Adam::new(AdamConfig { lr: hyper.lr, ..AdamConfig::default() });
    let mut order = train_idx.clone();
    let mut best_f1 = f64::NEG_INFINITY;
    let mut best_loss = f64::INFINITY;
    let mut best_params = collect_params(&mut model);
    let mut since_best = 0usize;

    for epoch in 0..hyper.epochs {
        for i in (1..order.len()).rev() {
            let j = rng.random_range(0..=i);
            order.swap(i, j);
        }
        let mut epoch_loss = 0.0;
        for &idx in &order {
            let (asset, ids, label, _) = &examples[idx];
            let msg_in = model.emb.mean_pool(ids);
            let (msg, msg_cache) = model.msg_mlp.forward_cached(&msg_in)?;
            let mut fused = asset.to_vec();
            fused.extend(&msg);
            let logits = model.head.forward(&fused)?;
            let (loss, dlogits) = softmax_cross_entropy(&logits, label.index())?;
            epoch_loss += loss;
            let dfused = model.head.backward(&fused, &logits, &dlogits);
            let dmsg = &dfused[ASSET_DIM..];
            let dmsg_in = model.msg_mlp.backward(&msg_cache, dmsg);
            model.emb.mean_pool_backward(ids, &dmsg_in);
            adam.step(&mut model);
            zero_grads(&mut model);
        }

        let mut golds = Vec::with_capacity(valid_idx.len());
        let mut preds = Vec::with_capacity(valid_idx.len());
        for &idx in &valid_idx {
            let (asset, ids, label, _) = &examples[idx];
            let (pred, _) = model.classify_features(asset, ids)?;
            golds.push(*label);
            preds.push(pred);
        }
        let f1 = macro_f1(&golds, &preds);
        let mean_loss = epoch_loss / order.len() as f64;
        log::debug!("identify epoch {epoch}: loss {mean_loss:.4}, valid macro-F1 {f1:.4}");
        if f1 > best_f1 || (f1 == best_f1 && mean_loss < best_loss) {
            best_f1 = f1;
            best_params = collect_params(&mut model);
            since_best = 0;
        } else if mean_loss < best_loss * 0.99 {
            since_best = 0;
        } else {
            since_best += 1;
        }
        best_loss = best_loss.min(mean_loss);
        if since_best >= hyper.patience {
            break;
        }
    }
    restore_params(&mut model, &best_params);
    log::info!("identify: best validation macro-F1 {best_f1:.4}");
    Ok(model)
}
