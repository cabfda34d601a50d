//! Minimal trainable-network kernel: dense layers, BiLSTM, linear-chain
//! CRF, a transformer encoder block, layer normalization, losses, an
//! adaptive-moment optimizer, and finite-difference gradient verification.
//! Everything is f64 and deterministic given a seed.

pub mod checkpoint;
pub mod crf;
pub mod dense;
pub mod embedding;
pub mod gradcheck;
pub mod loss;
pub mod lstm;
pub mod norm;
pub mod optim;
pub mod tensor;
pub mod transformer;

pub use checkpoint::Checkpoint;
pub use crf::CrfParams;
pub use dense::{Activation, Dense, Mlp};
pub use embedding::Embedding;
pub use loss::{log_sum_exp, softmax, softmax_cross_entropy};
pub use lstm::{BiLstm, LstmCell};
pub use norm::{layer_norm, layer_norm_backward, layer_norm_cached, LayerNormParams, DEFAULT_LN_EPS};
pub use optim::{Adam, AdamConfig};
pub use tensor::{all_params_finite, zero_grads, NnError, ParamVisit, Tensor};
pub use transformer::TransformerBlock;
