//! Canonical data model for chains, transactions, and event logs.

use std::fmt;
use std::str::FromStr;

use num_bigint::BigUint;
use num_traits::Zero;
use serde::de::Error as DeError;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::error::LedgerError;

/// Identifier of one blockchain (e.g. 1, 56, 137). Ids are unique within a
/// world and strictly positive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ChainId(pub u64);

impl fmt::Display for ChainId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// 20-byte account address, rendered as `0x` + 40 lowercase hex digits.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Address(pub [u8; 20]);

impl Address {
    pub const ZERO: Address = Address([0u8; 20]);

    pub fn to_hex(&self) -> String {
        format!("0x{}", hex::encode(self.0))
    }

    pub fn from_hex(s: &str) -> Result<Self, LedgerError> {
        let raw = s.strip_prefix("0x").unwrap_or(s);
        let bytes = hex::decode(raw)
            .map_err(|e| LedgerError::InvalidRecord(format!("bad address {s:?}: {e}")))?;
        let arr: [u8; 20] = bytes
            .try_into()
            .map_err(|_| LedgerError::InvalidRecord(format!("address {s:?} is not 20 bytes")))?;
        Ok(Address(arr))
    }
}

impl fmt::Debug for Address {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_hex())
    }
}

impl fmt::Display for Address {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_hex())
    }
}

/// 32-byte word: transaction hashes, log topics, event signature hashes.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct B256(pub [u8; 32]);

pub type TxHash = B256;

impl B256 {
    pub fn to_hex(&self) -> String {
        format!("0x{}", hex::encode(self.0))
    }

    pub fn from_hex(s: &str) -> Result<Self, LedgerError> {
        let raw = s.strip_prefix("0x").unwrap_or(s);
        let bytes = hex::decode(raw)
            .map_err(|e| LedgerError::InvalidRecord(format!("bad word {s:?}: {e}")))?;
        let arr: [u8; 32] = bytes
            .try_into()
            .map_err(|_| LedgerError::InvalidRecord(format!("word {s:?} is not 32 bytes")))?;
        Ok(B256(arr))
    }
}

impl fmt::Debug for B256 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_hex())
    }
}

impl fmt::Display for B256 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_hex())
    }
}

macro_rules! hex_serde {
    ($ty:ident) => {
        impl Serialize for $ty {
            fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
                s.serialize_str(&self.to_hex())
            }
        }
        impl<'de> Deserialize<'de> for $ty {
            fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
                let s = String::deserialize(d)?;
                $ty::from_hex(&s).map_err(D::Error::custom)
            }
        }
    };
}

hex_serde!(Address);
hex_serde!(B256);

/// Unsigned wei-like quantity. Values are bounded by 256 bits everywhere
/// they enter from the wire (32-byte event words), serialized as decimal
/// strings.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Amount(pub BigUint);

impl Amount {
    pub fn zero() -> Self {
        Amount(BigUint::zero())
    }

    pub fn from_u128(v: u128) -> Self {
        Amount(BigUint::from(v))
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_zero()
    }

    /// Nearest 64-bit float; round-to-nearest via decimal formatting, lossy
    /// above 2^53.
    pub fn to_f64(&self) -> f64 {
        self.0.to_str_radix(10).parse::<f64>().unwrap_or(f64::INFINITY)
    }

    pub fn to_u64(&self) -> Option<u64> {
        u64::try_from(&self.0).ok()
    }

    pub fn checked_sub(&self, other: &Amount) -> Option<Amount> {
        if self.0 >= other.0 {
            Some(Amount(&self.0 - &other.0))
        } else {
            None
        }
    }

    /// Big-endian 32-byte representation; None if the value needs >256 bits.
    pub fn to_word(&self) -> Option<[u8; 32]> {
        let bytes = self.0.to_bytes_be();
        if bytes.len() > 32 {
            return None;
        }
        let mut word = [0u8; 32];
        word[32 - bytes.len()..].copy_from_slice(&bytes);
        Some(word)
    }

    pub fn from_word(word: &[u8; 32]) -> Self {
        Amount(BigUint::from_bytes_be(word))
    }
}

impl From<u64> for Amount {
    fn from(v: u64) -> Self {
        Amount(BigUint::from(v))
    }
}

impl fmt::Debug for Amount {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl fmt::Display for Amount {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl FromStr for Amount {
    type Err = LedgerError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let v = BigUint::from_str(s)
            .map_err(|e| LedgerError::InvalidRecord(format!("bad amount {s:?}: {e}")))?;
        Ok(Amount(v))
    }
}

impl Serialize for Amount {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.0.to_str_radix(10))
    }
}

impl<'de> Deserialize<'de> for Amount {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(D::Error::custom)
    }
}

/// Byte string serialized as `0x` hex (transaction input, log data).
#[derive(Clone, PartialEq, Eq, Default)]
pub struct HexBytes(pub Vec<u8>);

impl fmt::Debug for HexBytes {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "0x{}", hex::encode(&self.0))
    }
}

impl Serialize for HexBytes {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&format!("0x{}", hex::encode(&self.0)))
    }
}

impl<'de> Deserialize<'de> for HexBytes {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        let raw = s.strip_prefix("0x").unwrap_or(&s);
        Ok(HexBytes(hex::decode(raw).map_err(D::Error::custom)?))
    }
}

/// Native coin or an ERC-20-style token contract.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum TokenRef {
    Native,
    Token(Address),
}

impl Serialize for TokenRef {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            TokenRef::Native => s.serialize_str("native"),
            TokenRef::Token(a) => s.serialize_str(&a.to_hex()),
        }
    }
}

impl<'de> Deserialize<'de> for TokenRef {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        if s == "native" {
            Ok(TokenRef::Native)
        } else {
            Ok(TokenRef::Token(Address::from_hex(&s).map_err(D::Error::custom)?))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TxStatus {
    Success,
    Failed,
}

/// Raw event log as emitted: topic0 is the event signature hash for
/// non-anonymous events.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawLog {
    #[serde(rename = "address")]
    pub emitter: Address,
    pub topics: Vec<B256>,
    pub data: HexBytes,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InternalTransfer {
    pub from: Address,
    pub to: Address,
    pub token: TokenRef,
    pub amount: Amount,
}

/// One on-chain transaction with its event logs and value movements; the
/// universal unit flowing through every stage of the tracer.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transaction {
    #[serde(rename = "chain_id")]
    pub chain: ChainId,
    pub tx_hash: TxHash,
    pub block_number: u64,
    pub timestamp: u64,
    #[serde(rename = "from")]
    pub from_addr: Address,
    #[serde(rename = "to")]
    pub to_addr: Option<Address>,
    pub value: Amount,
    #[serde(rename = "input")]
    pub input_data: HexBytes,
    pub status: TxStatus,
    pub logs: Vec<RawLog>,
    pub internal_transfers: Vec<InternalTransfer>,
}

impl Transaction {
    /// Addresses this transaction touches as an actor or transfer endpoint:
    /// sender, recipient, and the endpoints of every internal transfer.
    /// Token-event endpoints are added by the store, which can decode logs.
    pub fn base_endpoints(&self) -> Vec<Address> {
        let mut out = vec![self.from_addr];
        if let Some(to) = self.to_addr {
            out.push(to);
        }
        for t in &self.internal_transfers {
            out.push(t.from);
            out.push(t.to);
        }
        out
    }

    pub fn key(&self) -> TxKey {
        TxKey {
            timestamp: self.timestamp,
            block_number: self.block_number,
            tx_hash: self.tx_hash,
        }
    }
}

/// Total order used for all candidate and query listings:
/// (timestamp, block_number, tx_hash).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TxKey {
    pub timestamp: u64,
    pub block_number: u64,
    pub tx_hash: TxHash,
}

/// ABI parameter types in scope. Dynamic types are restricted to their
/// 32-byte head word; the simulator only emits static layouts.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AbiType {
    Uint(u16),
    Address,
    Bool,
    Str,
    Bytes,
}

impl AbiType {
    pub fn canonical(&self) -> String {
        match self {
            AbiType::Uint(bits) => format!("uint{bits}"),
            AbiType::Address => "address".to_string(),
            AbiType::Bool => "bool".to_string(),
            AbiType::Str => "string".to_string(),
            AbiType::Bytes => "bytes".to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EventParam {
    pub name: String,
    pub abi_type: AbiType,
    pub indexed: bool,
}

/// Parsed event declaration: name plus ordered, uniquely named parameters.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EventDecl {
    pub name: String,
    pub params: Vec<EventParam>,
}

impl EventDecl {
    /// Canonical signature `Name(type,type,...)` (indexed markers excluded).
    pub fn canonical_signature(&self) -> String {
        let types: Vec<String> = self.params.iter().map(|p| p.abi_type.canonical()).collect();
        format!("{}({})", self.name, types.join(","))
    }

    pub fn indexed_count(&self) -> usize {
        self.params.iter().filter(|p| p.indexed).count()
    }
}

/// Typed value decoded from one event parameter.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TypedValue {
    Numeric(Amount),
    Address(Address),
    Text(String),
    Bool(bool),
    Bytes(Vec<u8>),
}

/// One (parameter name, typed value) pair from a decoded event.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KVPair {
    pub key: String,
    pub value: TypedValue,
}

/// Event decoded against its declaration; pair order follows the
/// declaration's parameter order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DecodedEvent {
    pub name: String,
    pub pairs: Vec<KVPair>,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn address_hex_round_trip() {
        let a = Address([0xab; 20]);
        assert_eq!(a.to_hex(), format!("0x{}", "ab".repeat(20)));
        assert_eq!(Address::from_hex(&a.to_hex()).unwrap(), a);
        assert!(Address::from_hex("0x1234").is_err());
    }

    #[test]
    fn amount_decimal_serde() {
        let a = Amount::from_u128(10u128.pow(21));
        let json = serde_json::to_string(&a).unwrap();
        assert_eq!(json, "\"1000000000000000000000\"");
        let back: Amount = serde_json::from_str(&json).unwrap();
        assert_eq!(back, a);
    }

    #[test]
    fn amount_word_round_trip() {
        let a = Amount::from_u128(0xdead_beef_u128);
        let w = a.to_word().unwrap();
        assert_eq!(Amount::from_word(&w), a);
        assert_eq!(Amount::zero().to_word().unwrap(), [0u8; 32]);
    }

    #[test]
    fn amount_to_f64_rounds_to_nearest() {
        // 2^53 + 1 is not representable; nearest is 2^53.
        let v = Amount(BigUint::from((1u64 << 53) + 1));
        assert_eq!(v.to_f64(), 9007199254740992.0);
        assert_eq!(Amount::from(1u64).to_f64(), 1.0);
    }

    #[test]
    fn canonical_signature_excludes_indexed_markers() {
        let decl = EventDecl {
            name: "Transfer".into(),
            params: vec![
                EventParam { name: "from".into(), abi_type: AbiType::Address, indexed: true },
                EventParam { name: "to".into(), abi_type: AbiType::Address, indexed: true },
                EventParam { name: "value".into(), abi_type: AbiType::Uint(256), indexed: false },
            ],
        };
        assert_eq!(decl.canonical_signature(), "Transfer(address,address,uint256)");
    }
}
