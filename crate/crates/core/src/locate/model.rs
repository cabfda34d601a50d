//! Parameter-name sequence labeler: token embeddings, BiLSTM context
//! encoder, linear emission projection, and a linear-chain CRF on top.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use super::tags::{Role, Tag};
use crate::bridgesim::NerAnnotation;
use crate::ledger::{declaration_tokens, parse_event_signature, EventDecl};
use crate::nn::dense::{Activation, Dense};
use crate::nn::lstm::BiLstm;
use crate::nn::tensor::{collect_params, join_name, restore_params, zero_grads, ParamVisit, Tensor};
use crate::nn::{Adam, AdamConfig, Checkpoint, CrfParams, Embedding, NnError};
use crate::train::TrainError;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LocatorHyper {
    pub buckets: usize,
    pub emb_dim: usize,
    pub hidden: usize,
    pub epochs: usize,
    pub patience: usize,
    pub lr: f64,
    pub seed: u64,
}

impl Default for LocatorHyper {
    fn default() -> Self {
        LocatorHyper {
            buckets: 4096,
            emb_dim: 32,
            hidden: 64,
            epochs: 120,
            patience: 30,
            lr: 1e-3,
            seed: 11,
        }
    }
}

#[derive(Debug)]
pub struct LocatorModel {
    pub hyper: LocatorHyper,
    emb: Embedding,
    bilstm: BiLstm,
    proj: Dense,
    crf: CrfParams,
}

impl ParamVisit for LocatorModel {
    fn visit_params(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut Tensor, &mut Tensor)) {
        self.emb.visit_params(&join_name(prefix, "emb"), f);
        self.bilstm.visit_params(&join_name(prefix, "bilstm"), f);
        self.proj.visit_params(&join_name(prefix, "proj"), f);
        self.crf.visit_params(&join_name(prefix, "crf"), f);
    }
}

/// Per-parameter labeling outcome: the assigned role (if any) and a
/// confidence used to dedupe role collisions.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamRole {
    pub role: Option<Role>,
    pub confidence: f64,
}

impl LocatorModel {
    pub fn new(hyper: LocatorHyper) -> Self {
        let mut rng = ChaCha20Rng::seed_from_u64(hyper.seed);
        LocatorModel {
            emb: Embedding::new(hyper.buckets, hyper.emb_dim, &mut rng),
            bilstm: BiLstm::new(hyper.emb_dim, hyper.hidden, &mut rng),
            proj: Dense::new(2 * hyper.hidden, Tag::COUNT, Activation::Identity, &mut rng),
            crf: CrfParams::new(Tag::COUNT),
            hyper,
        }
    }

    pub fn token_ids(&self, tokens: &[String]) -> Vec<usize> {
        tokens.iter().map(|t| self.emb.bucket(t.as_bytes())).collect()
    }

    fn emissions(&self, ids: &[usize]) -> Result<Vec<Vec<f64>>, NnError> {
        let xs: Vec<Vec<f64>> = ids.iter().map(|&id| self.emb.lookup(id).to_vec()).collect();
        let hs = self.bilstm.encode(&xs)?;
        hs.iter().map(|h| self.proj.forward(h)).collect()
    }

    /// Viterbi tags for an arbitrary token sequence.
    pub fn tag_tokens(&self, tokens: &[String]) -> Result<Vec<Tag>, NnError> {
        if tokens.is_empty() {
            return Ok(Vec::new());
        }
        let emissions = self.emissions(&self.token_ids(tokens))?;
        let (path, _) = self.crf.viterbi(&emissions)?;
        Ok(path.iter().map(|&i| Tag::from_index(i).unwrap()).collect())
    }

    /// Role assignment per parameter: Viterbi-decoded token tags, majority
    /// non-O vote within each parameter's token span (ties go to no role),
    /// then at most one parameter per role (highest mean emission score for
    /// the winning tag; earlier parameter on ties).
    pub fn label_parameters(&self, decl: &EventDecl) -> Result<Vec<Option<Role>>, NnError> {
        let dt = declaration_tokens(decl);
        if dt.tokens.is_empty() {
            return Ok(Vec::new());
        }
        let ids = self.token_ids(&dt.tokens);
        let emissions = self.emissions(&ids)?;
        let (path, _) = self.crf.viterbi(&emissions)?;

        let mut assignments: Vec<ParamRole> = Vec::with_capacity(decl.params.len());
        for &(start, end) in &dt.param_spans {
            let mut counts = [0usize; Tag::COUNT];
            for &tag_idx in &path[start..end] {
                counts[tag_idx] += 1;
            }
            // Majority among non-O tags; ties demote to no role.
            let mut best_tag: Option<usize> = None;
            let mut best_count = 0usize;
            let mut tied = false;
            for (tag_idx, &count) in counts.iter().enumerate().skip(1) {
                if count > best_count {
                    best_count = count;
                    best_tag = Some(tag_idx);
                    tied = false;
                } else if count == best_count && count > 0 {
                    tied = true;
                }
            }
            let role = match best_tag {
                Some(tag_idx) if !tied && best_count > 0 => {
                    Role::from_tag(Tag::from_index(tag_idx).unwrap())
                }
                _ => None,
            };
            let confidence = match (role, end > start) {
                (Some(r), true) => {
                    let tag_idx = r.tag().index();
                    emissions[start..end].iter().map(|row| row[tag_idx]).sum::<f64>()
                        / (end - start) as f64
                }
                _ => f64::NEG_INFINITY,
            };
            assignments.push(ParamRole { role, confidence });
        }

        // One parameter per role.
        let mut result: Vec<Option<Role>> = assignments.iter().map(|a| a.role).collect();
        for role in [Role::SrcChain, Role::DstChain, Role::SrcAddr, Role::DstAddr, Role::Amount] {
            let holders: Vec<usize> = result
                .iter()
                .enumerate()
                .filter(|(_, r)| **r == Some(role))
                .map(|(i, _)| i)
                .collect();
            if holders.len() > 1 {
                let winner = holders
                    .iter()
                    .copied()
                    .max_by(|&a, &b| {
                        assignments[a]
                            .confidence
                            .partial_cmp(&assignments[b].confidence)
                            .unwrap()
                            .then(b.cmp(&a))
                    })
                    .unwrap();
                for &i in &holders {
                    if i != winner {
                        result[i] = None;
                    }
                }
            }
        }
        Ok(result)
    }

    pub fn save(&mut self, path: &Path) -> Result<(), NnError> {
        let hyper = serde_json::to_value(&self.hyper).expect("hyper serializes");
        Checkpoint::from_model("locate", hyper, self).save(path)
    }

    pub fn load(path: &Path) -> Result<Self, NnError> {
        let ckpt = Checkpoint::load(path)?;
        if ckpt.kind != "locate" {
            return Err(NnError::Checkpoint(format!(
                "expected locate checkpoint, found {:?}",
                ckpt.kind
            )));
        }
        let hyper: LocatorHyper = serde_json::from_value(ckpt.hyper.clone())
            .map_err(|e| NnError::Checkpoint(format!("bad hyperparameters: {e}")))?;
        let mut model = LocatorModel::new(hyper);
        ckpt.apply_to(&mut model)?;
        Ok(model)
    }
}

struct LabeledSeq {
    ids: Vec<usize>,
    gold: Vec<usize>,
}

fn prepare(
    model: &LocatorModel,
    annotations: &[NerAnnotation],
) -> Result<Vec<LabeledSeq>, TrainError> {
    annotations
        .iter()
        .map(|ann| {
            let decl = parse_event_signature(&ann.signature)
                .map_err(|e| TrainError::Data(format!("bad annotation signature: {e}")))?;
            let dt = declaration_tokens(&decl);
            if dt.tokens.len() != ann.tags.len() {
                return Err(TrainError::Data(format!(
                    "annotation {:?}: {} tokens but {} tags",
                    ann.signature,
                    dt.tokens.len(),
                    ann.tags.len()
                )));
            }
            let gold = ann
                .tags
                .iter()
                .map(|t| {
                    Tag::parse(t)
                        .map(Tag::index)
                        .ok_or_else(|| TrainError::Data(format!("unknown tag {t:?}")))
                })
                .collect::<Result<Vec<_>, _>>()?;
            Ok(LabeledSeq { ids: model.token_ids(&dt.tokens), gold })
        })
        .collect()
}

/// Trains the labeler by CRF negative log-likelihood with early selection
/// on validation token accuracy. The annotation list is split 7:1.5:1.5
/// deterministically from the seed.
pub fn train_labeler(
    annotations: &[NerAnnotation],
    hyper: LocatorHyper,
) -> Result<LocatorModel, TrainError> {
    let mut model = LocatorModel::new(hyper.clone());
    let seqs = prepare(&model, annotations)?;
    let usable: Vec<usize> =
        (0..seqs.len()).filter(|&i| !seqs[i].ids.is_empty()).collect();
    if usable.len() < 3 {
        return Err(TrainError::Data(format!(
            "need at least 3 non-empty annotated declarations, have {}",
            usable.len()
        )));
    }

    let mut rng = ChaCha20Rng::seed_from_u64(hyper.seed ^ 0x10c47e);
    let mut shuffled = usable.clone();
    for i in (1..shuffled.len()).rev() {
        let j = rng.random_range(0..=i);
        shuffled.swap(i, j);
    }
    let n = shuffled.len();
    let n_train = ((n as f64) * 0.7).round().max(1.0) as usize;
    let n_valid = (((n - n_train) as f64) / 2.0).ceil().max(1.0) as usize;
    let train_idx: Vec<usize> = shuffled[..n_train.min(n - 2)].to_vec();
    let valid_idx: Vec<usize> = shuffled[train_idx.len()..train_idx.len() + n_valid].to_vec();

    let mut adam = Adam::new(AdamConfig { lr: hyper.lr, ..AdamConfig::default() });
    let mut order = train_idx.clone();
    let mut best_acc = f64::NEG_INFINITY;
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
            let seq = &seqs[idx];
            let xs: Vec<Vec<f64>> =
                seq.ids.iter().map(|&id| model.emb.lookup(id).to_vec()).collect();
            let (hs, lstm_cache) = model.bilstm.encode_cached(&xs)?;
            let mut emissions = Vec::with_capacity(hs.len());
            for h in &hs {
                emissions.push(model.proj.forward(h)?);
            }
            let (loss, demissions) = model.crf.nll_and_grad(&emissions, &seq.gold)?;
            debug_assert!(loss >= -1e-9, "CRF NLL must be non-negative");
            epoch_loss += loss;
            let mut dhs = Vec::with_capacity(hs.len());
            for t in 0..hs.len() {
                dhs.push(model.proj.backward(&hs[t], &emissions[t], &demissions[t]));
            }
            let dxs = model.bilstm.backward(&lstm_cache, &dhs);
            for (&id, dx) in seq.ids.iter().zip(&dxs) {
                model.emb.accumulate(id, dx);
            }
            adam.step(&mut model);
            zero_grads(&mut model);
        }

        let mut correct = 0usize;
        let mut total = 0usize;
        for &idx in &valid_idx {
            let seq = &seqs[idx];
            let emissions = model.emissions(&seq.ids)?;
            let (path, _) = model.crf.viterbi(&emissions)?;
            correct += path.iter().zip(&seq.gold).filter(|(p, g)| *p == *g).count();
            total += seq.gold.len();
        }
        let acc = if total > 0 { correct as f64 / total as f64 } else { 0.0 };
        let mean_loss = epoch_loss / order.len().max(1) as f64;
        log::debug!("locate epoch {epoch}: loss {mean_loss:.4}, valid token accuracy {acc:.4}");
        // The validation set is a handful of declarations, so its accuracy
        // plateaus early; ties break toward lower training loss and real
        // loss movement resets the stop counter.
        if acc > best_acc || (acc == best_acc && mean_loss < best_loss) {
            best_acc = acc;
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
    log::info!("locate: best validation token accuracy {best_acc:.4}");
    Ok(model)
}

/// Token-level accuracy of the model against gold annotations.
pub fn token_accuracy(
    model: &LocatorModel,
    annotations: &[NerAnnotation],
) -> Result<f64, TrainError> {
    let seqs = prepare(model, annotations)?;
    let mut correct = 0usize;
    let mut total = 0usize;
    for seq in &seqs {
        if seq.ids.is_empty() {
            continue;
        }
        let emissions = model.emissions(&seq.ids).map_err(TrainError::Nn)?;
        let (path, _) = model.crf.viterbi(&emissions).map_err(TrainError::Nn)?;
        correct += path.iter().zip(&seq.gold).filter(|(p, g)| *p == *g).count();
        total += seq.gold.len();
    }
    Ok(if total > 0 { correct as f64 / total as f64 } else { 0.0 })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_declaration_gets_empty_assignment() {
        let model = LocatorModel::new(LocatorHyper::default());
        let decl = parse_event_signature("E ()").unwrap();
        assert!(model.label_parameters(&decl).unwrap().is_empty());
    }

    #[test]
    fn role_dedup_keeps_one_parameter_per_role() {
        // Untrained model: whatever it predicts, no role may appear twice.
        let model = LocatorModel::new(LocatorHyper::default());
        let decl = parse_event_signature(
            "E (uint256 destinationChainId, uint256 toChainId, address recipient, \
             address receiver, uint256 amount)",
        )
        .unwrap();
        let roles = model.label_parameters(&decl).unwrap();
        for role in [Role::SrcChain, Role::DstChain, Role::SrcAddr, Role::DstAddr, Role::Amount] {
            assert!(roles.iter().filter(|r| **r == Some(role)).count() <= 1);
        }
    }
}
