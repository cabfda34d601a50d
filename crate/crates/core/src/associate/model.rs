//! Key-value association model: per-pair encoders, a transformer block
//! over the unordered KV set, mean pooling into a transaction embedding,
//! and a shared-weight Siamese scorer with layer-normalized outputs.

use std::collections::BTreeMap;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::encoding::{pre_encode_value, PreValue, ValueEncoding, ValueKind, NUMERIC_BITS};
use crate::bridgesim::{LabeledDataset, Split};
use crate::ledger::{Amount, ChainId, Transaction, TxHash, TxStore, TypedValue};
use crate::locate::{fetch_candidates, ground_truth_clue, Direction, ExplicitClues, TimeWindow};
use crate::nn::dense::{Activation, Dense, Mlp, MlpCache};
use crate::nn::norm::{layer_norm_backward, layer_norm_cached, LayerNormParams, LnCache};
use crate::nn::tensor::{collect_params, join_name, restore_params, zero_grads, ParamVisit, Tensor};
use crate::nn::transformer::{TransformerBlock, TransformerCache};
use crate::nn::{softmax_cross_entropy, Adam, AdamConfig, Checkpoint, Embedding, NnError};
use crate::train::TrainError;

#[derive(Debug, Error)]
pub enum AssociateError {
    #[error("empty candidate set")]
    EmptyCandidates,
    #[error(transparent)]
    Nn(#[from] NnError),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AssociatorHyper {
    pub d: usize,
    pub emb_dim: usize,
    pub text_buckets: usize,
    pub addr_buckets: usize,
    pub ff_dim: usize,
    pub g_dim: usize,
    pub epochs: usize,
    pub patience: usize,
    pub lr: f64,
    pub seed: u64,
    /// Training candidate sets are capped here, always keeping the true
    /// counterpart.
    pub max_candidates: usize,
    /// Sets smaller than this are padded with window-neighborhood negatives.
    pub min_candidates: usize,
}

impl Default for AssociatorHyper {
    fn default() -> Self {
        AssociatorHyper {
            d: 64,
            emb_dim: 32,
            text_buckets: 4096,
            addr_buckets: 8192,
            ff_dim: 128,
            g_dim: 16,
            epochs: 120,
            patience: 10,
            lr: 5e-4,
            seed: 13,
            max_candidates: 8,
            min_candidates: 5,
        }
    }
}

/// One preprocessed key-value pair: key token ids plus the value route.
#[derive(Debug, Clone, PartialEq)]
pub struct PreKv {
    pub key_ids: Vec<usize>,
    pub value: PreValue,
}

#[derive(Debug)]
pub struct AssociatorModel {
    pub hyper: AssociatorHyper,
    text_emb: Embedding,
    addr_emb: Embedding,
    key_mlp: Mlp,
    num_mlp: Mlp,
    txt_mlp: Mlp,
    adr_mlp: Mlp,
    fuse: Dense,
    tf: TransformerBlock,
    out: Dense,
    f1: Dense,
    f2: Dense,
    g: Dense,
    score_norm: LayerNormParams,
}

impl ParamVisit for AssociatorModel {
    fn visit_params(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut Tensor, &mut Tensor)) {
        self.text_emb.visit_params(&join_name(prefix, "text_emb"), f);
        self.addr_emb.visit_params(&join_name(prefix, "addr_emb"), f);
        self.key_mlp.visit_params(&join_name(prefix, "key_mlp"), f);
        self.num_mlp.visit_params(&join_name(prefix, "num_mlp"), f);
        self.txt_mlp.visit_params(&join_name(prefix, "txt_mlp"), f);
        self.adr_mlp.visit_params(&join_name(prefix, "adr_mlp"), f);
        self.fuse.visit_params(&join_name(prefix, "fuse"), f);
        self.tf.visit_params(&join_name(prefix, "tf"), f);
        self.out.visit_params(&join_name(prefix, "out"), f);
        self.f1.visit_params(&join_name(prefix, "f1"), f);
        self.f2.visit_params(&join_name(prefix, "f2"), f);
        self.g.visit_params(&join_name(prefix, "g"), f);
        self.score_norm.visit_params(&join_name(prefix, "score_norm"), f);
    }
}

struct KvCache {
    key_ids: Vec<usize>,
    key_cache: MlpCache,
    value: PreValue,
    value_cache: MlpCache,
    joint: Vec<f64>,
    row: Vec<f64>,
}

pub struct TxCache {
    kvs: Vec<KvCache>,
    tf_cache: Option<TransformerCache>,
    pooled: Vec<f64>,
    emb: Vec<f64>,
}

impl AssociatorModel {
    pub fn new(hyper: AssociatorHyper) -> Self {
        let mut rng = ChaCha20Rng::seed_from_u64(hyper.seed);
        let d = hyper.d;
        AssociatorModel {
            text_emb: Embedding::new(hyper.text_buckets, hyper.emb_dim, &mut rng),
            addr_emb: Embedding::new(hyper.addr_buckets, hyper.emb_dim, &mut rng),
            key_mlp: Mlp::new(hyper.emb_dim, d, d, &mut rng),
            num_mlp: Mlp::new(NUMERIC_BITS, d, d, &mut rng),
            txt_mlp: Mlp::new(hyper.emb_dim, d, d, &mut rng),
            adr_mlp: Mlp::new(hyper.emb_dim, d, d, &mut rng),
            fuse: Dense::new(2 * d, d, Activation::Identity, &mut rng),
            tf: TransformerBlock::new(d, hyper.ff_dim, crate::nn::DEFAULT_LN_EPS, &mut rng),
            out: Dense::new(d, d, Activation::Identity, &mut rng),
            f1: Dense::new(d, d, Activation::Tanh, &mut rng),
            f2: Dense::new(d, d, Activation::Tanh, &mut rng),
            g: Dense::new(2 * d, hyper.g_dim, Activation::Tanh, &mut rng),
            score_norm: LayerNormParams::new(hyper.g_dim, crate::nn::DEFAULT_LN_EPS),
            hyper,
        }
    }

    /// Vectorizes one typed value through its route table (no MLPs yet).
    pub fn encode_value(&self, v: &TypedValue) -> ValueEncoding {
        match pre_encode_value(v, self.hyper.text_buckets, self.hyper.addr_buckets) {
            PreValue::Numeric(bits) => ValueEncoding { kind: ValueKind::Numeric64, vec: bits },
            PreValue::Text(ids) => {
                ValueEncoding { kind: ValueKind::Text, vec: self.text_emb.mean_pool(&ids) }
            }
            PreValue::Address(bucket) => ValueEncoding {
                kind: ValueKind::Address,
                vec: self.addr_emb.lookup(bucket).to_vec(),
            },
        }
    }

    /// Key-value pairs of a transaction: every decodable event's pairs plus
    /// synthetic amount-bearing pairs for the native value and each internal
    /// transfer, so amount/fee business logic stays representable.
    pub fn pre_encode_tx(&self, tx: &Transaction, store: &TxStore) -> Vec<PreKv> {
        let tb = self.hyper.text_buckets;
        let ab = self.hyper.addr_buckets;
        let mut kvs = Vec::new();
        for ev in store.abis().decode_tx(tx) {
            for pair in ev.pairs {
                kvs.push(PreKv {
                    key_ids: super::encoding::text_token_ids(&pair.key, tb),
                    value: pre_encode_value(&pair.value, tb, ab),
                });
            }
        }
        kvs.push(PreKv {
            key_ids: super::encoding::text_token_ids("__value", tb),
            value: pre_encode_value(&TypedValue::Numeric(tx.value.clone()), tb, ab),
        });
        for (i, transfer) in tx.internal_transfers.iter().enumerate() {
            kvs.push(PreKv {
                key_ids: super::encoding::text_token_ids(&format!("__transfer_amount_{i}"), tb),
                value: pre_encode_value(&TypedValue::Numeric(transfer.amount.clone()), tb, ab),
            });
        }
        kvs
    }

    fn value_route(&self, value: &PreValue) -> (&Mlp, Vec<f64>) {
        match value {
            PreValue::Numeric(bits) => (&self.num_mlp, bits.clone()),
            PreValue::Text(ids) => (&self.txt_mlp, self.text_emb.mean_pool(ids)),
            PreValue::Address(bucket) => (&self.adr_mlp, self.addr_emb.lookup(*bucket).to_vec()),
        }
    }

    pub fn encode_pre_kvs(&self, kvs: &[PreKv]) -> Result<(Vec<f64>, TxCache), NnError> {
        let d = self.hyper.d;
        let mut kv_caches = Vec::with_capacity(kvs.len());
        let mut rows = Vec::with_capacity(kvs.len());
        for kv in kvs {
            let key_vec = self.text_emb.mean_pool(&kv.key_ids);
            let (k64, key_cache) = self.key_mlp.forward_cached(&key_vec)?;
            let (mlp, value_in) = self.value_route(&kv.value);
            let (v64, value_cache) = mlp.forward_cached(&value_in)?;
            let mut joint = k64;
            joint.extend(v64);
            let row = self.fuse.forward(&joint)?;
            rows.push(row.clone());
            kv_caches.push(KvCache {
                key_ids: kv.key_ids.clone(),
                key_cache,
                value: kv.value.clone(),
                value_cache,
                joint,
                row,
            });
        }
        let (t_rows, tf_cache) = if rows.is_empty() {
            (Vec::new(), None)
        } else {
            let (t, c) = self.tf.forward_cached(&rows)?;
            (t, Some(c))
        };
        let mut pooled = vec![0.0; d];
        if !t_rows.is_empty() {
            for row in &t_rows {
                for (p, v) in pooled.iter_mut().zip(row) {
                    *p += v;
                }
            }
            let inv = 1.0 / t_rows.len() as f64;
            pooled.iter_mut().for_each(|p| *p *= inv);
        }
        let emb = self.out.forward(&pooled)?;
        Ok((emb.clone(), TxCache { kvs: kv_caches, tf_cache, pooled, emb }))
    }

    /// Transaction embedding (d floats), invariant to KV-pair permutation.
    pub fn encode_transaction(
        &self,
        tx: &Transaction,
        store: &TxStore,
    ) -> Result<Vec<f64>, NnError> {
        Ok(self.encode_pre_kvs(&self.pre_encode_tx(tx, store))?.0)
    }

    fn backward_tx(&mut self, cache: &TxCache, demb: &[f64]) {
        let dpooled = self.out.backward(&cache.pooled, &cache.emb, demb);
        let n = cache.kvs.len();
        if n == 0 {
            return;
        }
        let inv = 1.0 / n as f64;
        let drow_pooled: Vec<f64> = dpooled.iter().map(|g| g * inv).collect();
        let d_t_rows = vec![drow_pooled; n];
        let drows = self
            .tf
            .backward(cache.tf_cache.as_ref().expect("cache has rows"), &d_t_rows);
        for (kv, drow) in cache.kvs.iter().zip(&drows) {
            let djoint = self.fuse.backward(&kv.joint, &kv.row, drow);
            let d = self.hyper.d;
            let dkey_vec = self.key_mlp.backward(&kv.key_cache, &djoint[..d]);
            self.text_emb.mean_pool_backward(&kv.key_ids, &dkey_vec);
            let dvalue_in = match &kv.value {
                PreValue::Numeric(_) => {
                    self.num_mlp.backward(&kv.value_cache, &djoint[d..]);
                    None
                }
                PreValue::Text(ids) => {
                    Some((ids.clone(), self.txt_mlp.backward(&kv.value_cache, &djoint[d..])))
                }
                PreValue::Address(bucket) => {
                    let dvec = self.adr_mlp.backward(&kv.value_cache, &djoint[d..]);
                    self.addr_emb.accumulate(*bucket, &dvec);
                    None
                }
            };
            if let Some((ids, dvec)) = dvalue_in {
                self.text_emb.mean_pool_backward(&ids, &dvec);
            }
        }
    }

    fn siamese_f(&self, emb: &[f64]) -> Result<(Vec<f64>, (Vec<f64>, Vec<f64>)), NnError> {
        let h = self.f1.forward(emb)?;
        let y = self.f2.forward(&h)?;
        Ok((y.clone(), (h, y)))
    }

    /// Scores candidates against the query: p_i from the Siamese pair
    /// through g, layer-normalized, then reduced to a scalar by component
    /// sum. Ranking is score-descending with index-ascending tie order.
    pub fn score_candidates(
        &self,
        q_emb: &[f64],
        cand_embs: &[Vec<f64>],
    ) -> Result<AssociationScores, AssociateError> {
        if cand_embs.is_empty() {
            return Err(AssociateError::EmptyCandidates);
        }
        let (fq, _) = self.siamese_f(q_emb)?;
        let mut raw = Vec::with_capacity(cand_embs.len());
        let mut normalized = Vec::with_capacity(cand_embs.len());
        let mut scores = Vec::with_capacity(cand_embs.len());
        for cand in cand_embs {
            let (fc, _) = self.siamese_f(cand)?;
            let mut joint = fq.clone();
            joint.extend(fc);
            let p = self.g.forward(&joint).map_err(AssociateError::Nn)?;
            let phat = crate::nn::layer_norm(&p, &self.score_norm).map_err(AssociateError::Nn)?;
            scores.push(phat.iter().sum::<f64>());
            raw.push(p);
            normalized.push(phat);
        }
        let mut ranking: Vec<usize> = (0..scores.len()).collect();
        ranking.sort_by(|&a, &b| {
            scores[b].partial_cmp(&scores[a]).unwrap_or(std::cmp::Ordering::Equal).then(a.cmp(&b))
        });
        Ok(AssociationScores { raw, normalized, scores, ranking })
    }

    pub fn save(&mut self, path: &Path) -> Result<(), NnError> {
        let hyper = serde_json::to_value(&self.hyper).expect("hyper serializes");
        Checkpoint::from_model("associate", hyper, self).save(path)
    }

    pub fn load(path: &Path) -> Result<Self, NnError> {
        let ckpt = Checkpoint::load(path)?;
        if ckpt.kind != "associate" {
            return Err(NnError::Checkpoint(format!(
                "expected associate checkpoint, found {:?}",
                ckpt.kind
            )));
        }
        let hyper: AssociatorHyper = serde_json::from_value(ckpt.hyper.clone())
            .map_err(|e| NnError::Checkpoint(format!("bad hyperparameters: {e}")))?;
        let mut model = AssociatorModel::new(hyper);
        ckpt.apply_to(&mut model)?;
        Ok(model)
    }
}

#[derive(Debug, Clone)]
pub struct AssociationScores {
    pub raw: Vec<Vec<f64>>,
    pub normalized: Vec<Vec<f64>>,
    pub scores: Vec<f64>,
    /// Candidate indices sorted by score descending.
    pub ranking: Vec<usize>,
}

/// Argmax by score with deterministic tie-breaking: earlier timestamp,
/// lower block number, lexicographically smaller hash.
pub fn rank_and_select<'a>(
    scores: &AssociationScores,
    candidates: &[&'a Transaction],
) -> Result<&'a Transaction, AssociateError> {
    if candidates.is_empty() {
        return Err(AssociateError::EmptyCandidates);
    }
    let mut best = 0usize;
    for i in 1..candidates.len() {
        let si = scores.scores[i];
        let sb = scores.scores[best];
        if si > sb || (si == sb && candidates[i].key() < candidates[best].key()) {
            best = i;
        }
    }
    Ok(candidates[best])
}

// ---------------------------------------------------------------------------
// Training.

struct RankExample {
    query: (ChainId, TxHash),
    candidates: Vec<(ChainId, TxHash)>,
    true_idx: usize,
    split: Split,
}

/// Builds candidate sets for every labeled pair in both directions from
/// label-derived clues and the calibrated window, augments thin sets with
/// window-neighborhood negatives, and caps set size while keeping the true
/// counterpart.
fn build_examples(
    ds: &LabeledDataset,
    delta_s: u64,
    hyper: &AssociatorHyper,
    rng: &mut ChaCha20Rng,
) -> (Vec<RankExample>, usize) {
    let mut examples = Vec::new();
    let mut skipped = 0usize;
    for pair in &ds.pairs {
        for direction in [Direction::Forward, Direction::Backward] {
            let (q_chain, q_hash, t_chain, t_hash) = match direction {
                Direction::Forward => (pair.src_chain, pair.src_tx, pair.dst_chain, pair.dst_tx),
                Direction::Backward => (pair.dst_chain, pair.dst_tx, pair.src_chain, pair.src_tx),
            };
            let Some(split) = ds.split_of(q_chain, q_hash) else { continue };
            if split == Split::Test {
                continue;
            }
            let Some(query) = ds.store.get(q_chain, q_hash) else { continue };
            let Some(target) = ds.store.get(t_chain, t_hash) else { continue };
            let Some((chain, address)) = ground_truth_clue(query, target, &ds.store) else {
                skipped += 1;
                continue;
            };
            let clues = ExplicitClues {
                direction,
                counterpart_chain: chain,
                counterpart_address: address,
                window: TimeWindow { anchor: query.timestamp, delta_s },
            };
            let Ok(set) = fetch_candidates(&clues, &ds.store) else {
                skipped += 1;
                continue;
            };
            let mut keys: Vec<(ChainId, TxHash)> =
                set.candidates.iter().map(|t| (t.chain, t.tx_hash)).collect();
            if !keys.contains(&(t_chain, t_hash)) {
                skipped += 1;
                continue;
            }

            // Pad with neighborhood negatives drawn from the counterpart
            // chain around the window.
            if keys.len() < hyper.min_candidates {
                let (w_lo, w_hi) = clues.window.bounds(direction);
                let span = delta_s.saturating_mul(4);
                let lo = w_lo.saturating_sub(span);
                let hi = w_hi.saturating_add(span);
                let pool: Vec<(ChainId, TxHash)> = ds
                    .store
                    .chain_transactions(chain)
                    .filter(|t| {
                        t.timestamp >= lo
                            && t.timestamp <= hi
                            && crate::ledger::is_traceable(t)
                            && (t.chain, t.tx_hash) != (q_chain, q_hash)
                    })
                    .map(|t| (t.chain, t.tx_hash))
                    .collect();
                let mut tries = 0;
                while keys.len() < hyper.min_candidates && !pool.is_empty() && tries < 64 {
                    let pick = pool[rng.random_range(0..pool.len())];
                    tries += 1;
                    if !keys.contains(&pick) {
                        keys.push(pick);
                    }
                }
            }

            // Cap, always retaining the true counterpart.
            if keys.len() > hyper.max_candidates {
                let true_key = (t_chain, t_hash);
                for i in (1..keys.len()).rev() {
                    let j = rng.random_range(0..=i);
                    keys.swap(i, j);
                }
                let mut kept: Vec<(ChainId, TxHash)> = vec![true_key];
                kept.extend(keys.into_iter().filter(|k| *k != true_key));
                kept.truncate(hyper.max_candidates);
                // Re-sort into store order so the capping leaves ordering
                // deterministic and realistic.
                kept.sort_by_key(|(c, h)| ds.store.get(*c, *h).map(|t| t.key()));
                keys = kept;
            }

            let true_idx = keys.iter().position(|k| *k == (t_chain, t_hash)).unwrap();
            examples.push(RankExample { query: (q_chain, q_hash), candidates: keys, true_idx, split });
        }
    }
    (examples, skipped)
}

/// Listwise softmax cross-entropy over candidate scores with the true
/// counterpart as target; early selection on validation top-1 accuracy.
pub fn train_associator(
    ds: &LabeledDataset,
    delta_s: u64,
    hyper: AssociatorHyper,
) -> Result<AssociatorModel, TrainError> {
    let mut model = AssociatorModel::new(hyper.clone());
    let mut rng = ChaCha20Rng::seed_from_u64(hyper.seed ^ 0xa550c);
    let (examples, skipped) = build_examples(ds, delta_s, &hyper, &mut rng);
    if skipped > 0 {
        log::warn!("associate: skipped {skipped} pair-directions without a reachable counterpart");
    }
    let train_idx: Vec<usize> = examples
        .iter()
        .enumerate()
        .filter(|(_, e)| e.split == Split::Train)
        .map(|(i, _)| i)
        .collect();
    let valid_idx: Vec<usize> = examples
        .iter()
        .enumerate()
        .filter(|(_, e)| e.split == Split::Valid)
        .map(|(i, _)| i)
        .collect();
    if train_idx.is_empty() || valid_idx.is_empty() {
        return Err(TrainError::Data("empty train or valid split for ranking".into()));
    }

    // Preprocess every transaction the examples touch, once.
    let mut pre: BTreeMap<(ChainId, TxHash), Vec<PreKv>> = BTreeMap::new();
    for ex in &examples {
        for key in std::iter::once(&ex.query).chain(&ex.candidates) {
            if !pre.contains_key(key) {
                let tx = ds.store.get(key.0, key.1).expect("example txs resolve");
                pre.insert(*key, model.pre_encode_tx(tx, &ds.store));
            }
        }
    }

    let mut adam = Adam::new(AdamConfig { lr: hyper.lr, ..AdamConfig::default() });
    let mut order = train_idx.clone();
    let mut best_acc = f64::NEG_INFINITY;
    let mut best_loss = f64::INFINITY;
    let mut best_params = collect_params(&mut model);
    let mut since_best = 0usize;

    for epoch in 0..hyper.epochs {
        // Mild decay keeps late epochs from bouncing out of the minimum.
        adam.cfg.lr = hyper.lr * 0.97f64.powi(epoch as i32);
        for i in (1..order.len()).rev() {
            let j = rng.random_range(0..=i);
            order.swap(i, j);
        }
        let mut epoch_loss = 0.0;
        for &idx in &order {
            let ex = &examples[idx];
            let (q_emb, q_cache) = model.encode_pre_kvs(&pre[&ex.query])?;
            let mut cand_embs = Vec::with_capacity(ex.candidates.len());
            let mut cand_caches = Vec::with_capacity(ex.candidates.len());
            for key in &ex.candidates {
                let (emb, cache) = model.encode_pre_kvs(&pre[key])?;
                cand_embs.push(emb);
                cand_caches.push(cache);
            }

            let (fq, (fq_h, fq_y)) = model.siamese_f(&q_emb)?;
            let mut scores = Vec::with_capacity(cand_embs.len());
            let mut sia: Vec<(Vec<f64>, Vec<f64>, Vec<f64>, Vec<f64>, LnCache)> = Vec::new();
            for cand in &cand_embs {
                let (fc, (fc_h, fc_y)) = model.siamese_f(cand)?;
                let mut joint = fq.clone();
                joint.extend(fc);
                let p = model.g.forward(&joint)?;
                let (phat, ln_cache) = layer_norm_cached(&p, &model.score_norm)?;
                scores.push(phat.iter().sum::<f64>());
                sia.push((fc_h, fc_y, joint, p, ln_cache));
            }
            let (loss, dscores) = softmax_cross_entropy(&scores, ex.true_idx)?;
            epoch_loss += loss;

            let d = hyper.d;
            let mut dfq = vec![0.0; d];
            for (i, (fc_h, fc_y, joint, p, ln_cache)) in sia.iter().enumerate() {
                let dphat = vec![dscores[i]; hyper.g_dim];
                let dp = layer_norm_backward(&mut model.score_norm, ln_cache, &dphat);
                let djoint = model.g.backward(joint, p, &dp);
                for (a, b) in dfq.iter_mut().zip(&djoint[..d]) {
                    *a += b;
                }
                let dh = model.f2.backward(fc_h, fc_y, &djoint[d..]);
                let dcand_emb = model.f1.backward(&cand_embs[i], fc_h, &dh);
                model.backward_tx(&cand_caches[i], &dcand_emb);
            }
            let dh = model.f2.backward(&fq_h, &fq_y, &dfq);
            let dq_emb = model.f1.backward(&q_emb, &fq_h, &dh);
            model.backward_tx(&q_cache, &dq_emb);

            adam.step(&mut model);
            zero_grads(&mut model);
        }

        let mut correct = 0usize;
        for &idx in &valid_idx {
            let ex = &examples[idx];
            let (q_emb, _) = model.encode_pre_kvs(&pre[&ex.query])?;
            let mut cand_embs = Vec::with_capacity(ex.candidates.len());
            for key in &ex.candidates {
                cand_embs.push(model.encode_pre_kvs(&pre[key])?.0);
            }
            let scored = model
                .score_candidates(&q_emb, &cand_embs)
                .map_err(|e| TrainError::Data(e.to_string()))?;
            if scored.ranking[0] == ex.true_idx {
                correct += 1;
            }
        }
        let acc = correct as f64 / valid_idx.len() as f64;
        let mean_loss = epoch_loss / order.len() as f64;
        log::info!("associate epoch {epoch}: loss {mean_loss:.4}, valid top-1 {acc:.4}");
        if acc > best_acc || (acc == best_acc && mean_loss < best_loss) {
            best_acc = acc;
            best_params = collect_params(&mut model);
            since_best = 0;
        } else if mean_loss < best_loss * 0.99 {
            // Optimization is still moving; do not stop on a flat
            // validation stretch.
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
    log::info!("associate: best validation top-1 {best_acc:.4}");
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_model() -> AssociatorModel {
        AssociatorModel::new(AssociatorHyper {
            d: 8,
            emb_dim: 6,
            ff_dim: 10,
            g_dim: 4,
            ..AssociatorHyper::default()
        })
    }

    #[test]
    fn empty_kv_set_has_constant_embedding() {
        let model = tiny_model();
        let (a, _) = model.encode_pre_kvs(&[]).unwrap();
        let (b, _) = model.encode_pre_kvs(&[]).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 8);
    }

    #[test]
    fn kv_permutation_leaves_embedding_unchanged() {
        let model = tiny_model();
        let kvs: Vec<PreKv> = vec![
            PreKv {
                key_ids: vec![1, 2],
                value: PreValue::Numeric(super::super::encoding::numeric_bits(&Amount::from(
                    42u64,
                ))),
            },
            PreKv { key_ids: vec![3], value: PreValue::Address(17) },
            PreKv { key_ids: vec![4, 5], value: PreValue::Text(vec![8, 9]) },
        ];
        let (a, _) = model.encode_pre_kvs(&kvs).unwrap();
        let permuted: Vec<PreKv> = vec![kvs[2].clone(), kvs[0].clone(), kvs[1].clone()];
        let (b, _) = model.encode_pre_kvs(&permuted).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-9, "embedding must be KV-order invariant");
        }
    }

    #[test]
    fn singleton_candidate_ranks_first() {
        let model = tiny_model();
        let q = vec![0.1; 8];
        let c = vec![vec![-0.3; 8]];
        let scores = model.score_candidates(&q, &c).unwrap();
        assert_eq!(scores.ranking, vec![0]);
        assert!(model.score_candidates(&q, &[]).is_err());
    }

    #[test]
    fn scoring_has_no_cross_candidate_coupling() {
        let model = tiny_model();
        let q = vec![0.2; 8];
        let c1 = vec![0.5; 8];
        let c2 = vec![-0.1; 8];
        let both = model.score_candidates(&q, &[c1.clone(), c2.clone()]).unwrap();
        let alone1 = model.score_candidates(&q, &[c1]).unwrap();
        let alone2 = model.score_candidates(&q, &[c2]).unwrap();
        assert!((both.scores[0] - alone1.scores[0]).abs() < 1e-12);
        assert!((both.scores[1] - alone2.scores[0]).abs() < 1e-12);
    }

    #[test]
    fn uniform_shift_of_raw_scores_keeps_ordering() {
        // LayerNorm removes per-vector mean, so adding c*1 to every raw
        // score vector leaves each candidate's scalar unchanged. A fresh
        // gamma=1 sums every normalized vector to ~0, so give the norm a
        // trained-looking non-uniform scale first.
        let mut model = tiny_model();
        model.score_norm.gamma.data_mut().copy_from_slice(&[0.7, -1.3, 2.0, 0.4]);
        model.score_norm.beta.data_mut().copy_from_slice(&[0.1, 0.0, -0.2, 0.3]);
        let ps = [vec![0.4, -0.2, 0.9, 0.0], vec![1.4, 0.3, -0.5, 0.2], vec![0.0, 0.1, 0.2, 0.3]];
        let score_of = |p: &[f64]| {
            crate::nn::layer_norm(p, &model.score_norm).unwrap().iter().sum::<f64>()
        };
        for c in [-3.0, 0.0, 2.5] {
            let base: Vec<f64> = ps.iter().map(|p| score_of(p)).collect();
            let shifted: Vec<f64> = ps
                .iter()
                .map(|p| {
                    let q: Vec<f64> = p.iter().map(|v| v + c).collect();
                    score_of(&q)
                })
                .collect();
            let order = |xs: &[f64]| {
                let mut idx: Vec<usize> = (0..xs.len()).collect();
                idx.sort_by(|&a, &b| xs[b].partial_cmp(&xs[a]).unwrap());
                idx
            };
            assert_eq!(order(&base), order(&shifted));
        }
    }
}
