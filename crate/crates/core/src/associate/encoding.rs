//! Typed-value encodings for key-value association: numerics as the bit
//! pattern of their nearest 64-bit float, text as pooled token embeddings,
//! addresses as hash-bucket embeddings.

use crate::ledger::{tokenize_identifier, Amount, TypedValue};
use crate::nn::embedding::bucket_of;

pub const NUMERIC_BITS: usize = 64;

/// Bit pattern of the nearest f64, sign bit first, then exponent, then
/// mantissa (big-endian bit order), as 0/1 floats.
pub fn numeric_bits(a: &Amount) -> Vec<f64> {
    let bits = a.to_f64().to_bits();
    (0..NUMERIC_BITS).map(|k| ((bits >> (63 - k)) & 1) as f64).collect()
}

/// Model-independent preprocessing of a typed value: everything the
/// encoder needs except the trainable tables. Bools map to numeric 0/1,
/// bytes to the text of their hex form.
#[derive(Debug, Clone, PartialEq)]
pub enum PreValue {
    Numeric(Vec<f64>),
    Text(Vec<usize>),
    Address(usize),
}

pub fn pre_encode_value(v: &TypedValue, text_buckets: usize, addr_buckets: usize) -> PreValue {
    match v {
        TypedValue::Numeric(a) => PreValue::Numeric(numeric_bits(a)),
        TypedValue::Bool(b) => PreValue::Numeric(numeric_bits(&Amount::from(*b as u64))),
        TypedValue::Address(a) => PreValue::Address(bucket_of(&a.0, addr_buckets)),
        TypedValue::Text(s) => PreValue::Text(text_token_ids(s, text_buckets)),
        TypedValue::Bytes(b) => PreValue::Text(text_token_ids(&hex::encode(b), text_buckets)),
    }
}

pub fn text_token_ids(s: &str, buckets: usize) -> Vec<usize> {
    tokenize_identifier(s)
        .into_iter()
        .map(|t| bucket_of(t.as_bytes(), buckets))
        .collect()
}

/// Kind marker of a value encoding, mirroring the three encoder routes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ValueKind {
    Numeric64,
    Text,
    Address,
}

/// A value vectorized for the per-type MLPs: 64 bits for numerics, 32-d
/// pooled/looked-up embeddings for text and addresses.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueEncoding {
    pub kind: ValueKind,
    pub vec: Vec<f64>,
}
