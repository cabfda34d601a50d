//! ABI-level event machinery: declaration parsing, signature hashing, and
//! encoding/decoding of logs against a declaration.
//!
//! Declarations follow the explorer-style textual form
//! `Name (type name, index_topic_K type name, ...)` where `index_topic_K`
//! marks an indexed parameter. Dynamic types (`string`, `bytes`) are carried
//! as fixed 32-byte head words; there is no tail decoding.

use sha3::{Digest, Keccak256};

use super::error::LedgerError;
use super::types::{
    AbiType, Address, Amount, B256, DecodedEvent, EventDecl, EventParam, KVPair, RawLog,
    TypedValue,
};

/// keccak256 of the canonical signature, i.e. the log's topic0.
pub fn signature_hash(decl: &EventDecl) -> B256 {
    let digest = Keccak256::digest(decl.canonical_signature().as_bytes());
    B256(digest.into())
}

fn parse_type(tok: &str) -> Result<AbiType, LedgerError> {
    match tok {
        "address" => Ok(AbiType::Address),
        "bool" => Ok(AbiType::Bool),
        "string" => Ok(AbiType::Str),
        "bytes" => Ok(AbiType::Bytes),
        _ => {
            if let Some(bits) = tok.strip_prefix("uint") {
                let bits: u16 = if bits.is_empty() {
                    256
                } else {
                    bits.parse()
                        .map_err(|_| LedgerError::Parse(format!("unknown type token {tok:?}")))?
                };
                if bits == 0 || bits > 256 || bits % 8 != 0 {
                    return Err(LedgerError::Parse(format!("unsupported width in {tok:?}")));
                }
                Ok(AbiType::Uint(bits))
            } else {
                Err(LedgerError::Parse(format!("unknown type token {tok:?}")))
            }
        }
    }
}

fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() || c == '_' => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

/// Parses an event declaration of the form
/// `Name (uint256 amount, index_topic_1 address depositor, ...)`.
pub fn parse_event_signature(text: &str) -> Result<EventDecl, LedgerError> {
    let text = text.trim();
    let open = text
        .find('(')
        .ok_or_else(|| LedgerError::Parse("missing '('".into()))?;
    if !text.ends_with(')') {
        return Err(LedgerError::Parse("unbalanced parentheses".into()));
    }
    let name = text[..open].trim();
    if !is_identifier(name) {
        return Err(LedgerError::Parse(format!("bad event name {name:?}")));
    }
    let body = &text[open + 1..text.len() - 1];
    if body.contains('(') || body.contains(')') {
        return Err(LedgerError::Parse("unbalanced parentheses".into()));
    }

    let mut params = Vec::new();
    if !body.trim().is_empty() {
        for piece in body.split(',') {
            let mut toks = piece.split_whitespace().peekable();
            let mut indexed = false;
            if let Some(tok) = toks.peek() {
                if let Some(k) = tok.strip_prefix("index_topic_") {
                    k.parse::<u8>()
                        .map_err(|_| LedgerError::Parse(format!("bad indexed marker {tok:?}")))?;
                    indexed = true;
                    toks.next();
                }
            }
            let ty_tok = toks
                .next()
                .ok_or_else(|| LedgerError::Parse(format!("empty parameter in {piece:?}")))?;
            let abi_type = parse_type(ty_tok)?;
            let name_tok = toks
                .next()
                .ok_or_else(|| LedgerError::Parse(format!("missing parameter name in {piece:?}")))?;
            if !is_identifier(name_tok) {
                return Err(LedgerError::Parse(format!("bad parameter name {name_tok:?}")));
            }
            if toks.next().is_some() {
                return Err(LedgerError::Parse(format!("trailing tokens in {piece:?}")));
            }
            if params.iter().any(|p: &EventParam| p.name == name_tok) {
                return Err(LedgerError::Parse(format!("duplicate parameter name {name_tok:?}")));
            }
            params.push(EventParam {
                name: name_tok.to_string(),
                abi_type,
                indexed,
            });
        }
    }
    Ok(EventDecl {
        name: name.to_string(),
        params,
    })
}

fn encode_word(value: &TypedValue, abi_type: AbiType) -> Result<[u8; 32], LedgerError> {
    let mut word = [0u8; 32];
    match (abi_type, value) {
        (AbiType::Uint(bits), TypedValue::Numeric(a)) => {
            let w = a
                .to_word()
                .ok_or_else(|| LedgerError::Decode(format!("numeric {a} exceeds 256 bits")))?;
            if bits < 256 && Amount::from_word(&w).0.bits() > bits as u64 {
                return Err(LedgerError::Decode(format!("numeric {a} exceeds uint{bits}")));
            }
            word = w;
        }
        (AbiType::Address, TypedValue::Address(a)) => {
            word[12..].copy_from_slice(&a.0);
        }
        (AbiType::Bool, TypedValue::Bool(b)) => {
            word[31] = *b as u8;
        }
        (AbiType::Str, TypedValue::Text(s)) => {
            let bytes = s.as_bytes();
            if bytes.len() > 32 || bytes.contains(&0) {
                return Err(LedgerError::Decode(format!(
                    "string {s:?} does not fit a 32-byte head word"
                )));
            }
            word[..bytes.len()].copy_from_slice(bytes);
        }
        (AbiType::Bytes, TypedValue::Bytes(b)) => {
            if b.len() != 32 {
                return Err(LedgerError::Decode("bytes value must be exactly 32 bytes".into()));
            }
            word.copy_from_slice(b);
        }
        _ => {
            return Err(LedgerError::Decode(format!(
                "value {value:?} does not match type {}",
                abi_type.canonical()
            )))
        }
    }
    Ok(word)
}

fn decode_word(word: &[u8; 32], abi_type: AbiType) -> Result<TypedValue, LedgerError> {
    Ok(match abi_type {
        AbiType::Uint(_) => TypedValue::Numeric(Amount::from_word(word)),
        AbiType::Address => {
            let mut a = [0u8; 20];
            a.copy_from_slice(&word[12..]);
            TypedValue::Address(Address(a))
        }
        AbiType::Bool => TypedValue::Bool(word[31] != 0),
        AbiType::Str => {
            let end = word.iter().position(|&b| b == 0).unwrap_or(32);
            let s = std::str::from_utf8(&word[..end])
                .map_err(|e| LedgerError::Decode(format!("non-utf8 string head: {e}")))?;
            TypedValue::Text(s.to_string())
        }
        AbiType::Bytes => TypedValue::Bytes(word.to_vec()),
    })
}

/// Builds a raw log for `decl` with the given parameter values, in
/// declaration order. Indexed values go to topics, the rest to 32-byte
/// data slots. This is the generator side of the decode round-trip.
pub fn encode_event(
    decl: &EventDecl,
    emitter: Address,
    values: &[TypedValue],
) -> Result<RawLog, LedgerError> {
    if values.len() != decl.params.len() {
        return Err(LedgerError::Decode(format!(
            "{} values for {} parameters",
            values.len(),
            decl.params.len()
        )));
    }
    if decl.indexed_count() > 3 {
        return Err(LedgerError::Decode("more than 3 indexed parameters".into()));
    }
    let mut topics = vec![signature_hash(decl)];
    let mut data = Vec::new();
    for (param, value) in decl.params.iter().zip(values) {
        let word = encode_word(value, param.abi_type)?;
        if param.indexed {
            topics.push(B256(word));
        } else {
            data.extend_from_slice(&word);
        }
    }
    Ok(RawLog {
        emitter,
        topics,
        data: super::types::HexBytes(data),
    })
}

/// Decodes a raw log against its declaration into named key-value pairs.
pub fn decode_event(log: &RawLog, decl: &EventDecl) -> Result<DecodedEvent, LedgerError> {
    match log.topics.first() {
        Some(t0) if *t0 == signature_hash(decl) => {}
        Some(_) => return Err(LedgerError::SignatureMismatch),
        None => return Err(LedgerError::Decode("log has no topics".into())),
    }
    let n_indexed = decl.indexed_count();
    if n_indexed > 3 {
        return Err(LedgerError::Decode("more than 3 indexed parameters".into()));
    }
    if log.topics.len() != 1 + n_indexed {
        return Err(LedgerError::Decode(format!(
            "expected {} topics, found {}",
            1 + n_indexed,
            log.topics.len()
        )));
    }
    let n_plain = decl.params.len() - n_indexed;
    if log.data.0.len() != 32 * n_plain {
        return Err(LedgerError::Decode(format!(
            "expected {} data bytes, found {}",
            32 * n_plain,
            log.data.0.len()
        )));
    }

    let mut pairs = Vec::with_capacity(decl.params.len());
    let mut next_topic = 1;
    let mut next_slot = 0;
    for param in &decl.params {
        let word: [u8; 32] = if param.indexed {
            let w = log.topics[next_topic].0;
            next_topic += 1;
            w
        } else {
            let slot = &log.data.0[next_slot * 32..(next_slot + 1) * 32];
            next_slot += 1;
            slot.try_into().unwrap()
        };
        pairs.push(KVPair {
            key: param.name.clone(),
            value: decode_word(&word, param.abi_type)?,
        });
    }
    Ok(DecodedEvent {
        name: decl.name.clone(),
        pairs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    // The explorer-style declaration shape this parser targets.
    const DEPOSIT_DECL: &str = "FundsDeposited (uint256 amount, uint256 originChainId, \
        uint256 destinationChainId, uint64 relayerFeePct, index_topic_1 uint32 depositId, \
        uint32 quoteTimestamp, index_topic_2 address originToken, address recipient, \
        index_topic_3 address depositor)";

    #[test]
    fn parses_full_deposit_declaration() {
        let decl = parse_event_signature(DEPOSIT_DECL).unwrap();
        assert_eq!(decl.name, "FundsDeposited");
        assert_eq!(decl.params.len(), 9);
        let origin = decl.params.iter().find(|p| p.name == "originChainId").unwrap();
        assert_eq!(origin.abi_type, AbiType::Uint(256));
        assert!(!origin.indexed);
        let depositor = decl.params.iter().find(|p| p.name == "depositor").unwrap();
        assert_eq!(depositor.abi_type, AbiType::Address);
        assert!(depositor.indexed);
        assert_eq!(decl.indexed_count(), 3);
    }

    #[test]
    fn parses_empty_parameter_list() {
        let decl = parse_event_signature("E ()").unwrap();
        assert_eq!(decl.name, "E");
        assert!(decl.params.is_empty());
    }

    #[test]
    fn parses_erc20_transfer() {
        // Hand-parsed oracle for the canonical ERC-20 Transfer signature.
        let decl = parse_event_signature(
            "Transfer (index_topic_1 address from, index_topic_2 address to, uint256 value)",
        )
        .unwrap();
        let expected = EventDecl {
            name: "Transfer".into(),
            params: vec![
                EventParam { name: "from".into(), abi_type: AbiType::Address, indexed: true },
                EventParam { name: "to".into(), abi_type: AbiType::Address, indexed: true },
                EventParam { name: "value".into(), abi_type: AbiType::Uint(256), indexed: false },
            ],
        };
        assert_eq!(decl, expected);
        // Known mainnet constant for Transfer(address,address,uint256).
        assert_eq!(
            signature_hash(&decl).to_hex(),
            "0xddf252ad1be2c89b69c2b068fc378daa952ba7f163c4a11628f55a4df523b3ef"
        );
    }

    #[test]
    fn parse_rejects_malformed_declarations() {
        assert!(parse_event_signature("E (uint256 a").is_err());
        assert!(parse_event_signature("E (uint7 a)").is_err());
        assert!(parse_event_signature("E (float a)").is_err());
        assert!(parse_event_signature("E (uint256 a, uint256 a)").is_err());
        assert!(parse_event_signature("E (uint256)").is_err());
        assert!(parse_event_signature("2E (uint256 a)").is_err());
    }

    #[test]
    fn decode_minimal_one_word_event() {
        let decl = parse_event_signature("FundsDeposited (uint256 amount)").unwrap();
        let mut data = vec![0u8; 32];
        data[31] = 1;
        let log = RawLog {
            emitter: Address([1u8; 20]),
            topics: vec![signature_hash(&decl)],
            data: crate::ledger::types::HexBytes(data),
        };
        let ev = decode_event(&log, &decl).unwrap();
        assert_eq!(ev.pairs.len(), 1);
        assert_eq!(ev.pairs[0].key, "amount");
        assert_eq!(ev.pairs[0].value, TypedValue::Numeric(Amount::from(1u64)));
    }

    #[test]
    fn decode_withdrawal_style_log_keys() {
        let decl = parse_event_signature(
            "TokensSent (uint256 amount, index_topic_1 address recipient, uint256 nonce, \
             address messenger)",
        )
        .unwrap();
        let values = vec![
            TypedValue::Numeric(Amount::from_u128(5 * 10u128.pow(17))),
            TypedValue::Address(Address([7u8; 20])),
            TypedValue::Numeric(Amount::from(91202u64)),
            TypedValue::Address(Address([9u8; 20])),
        ];
        let log = encode_event(&decl, Address([2u8; 20]), &values).unwrap();
        let ev = decode_event(&log, &decl).unwrap();
        let keys: Vec<&str> = ev.pairs.iter().map(|p| p.key.as_str()).collect();
        assert_eq!(keys, vec!["amount", "recipient", "nonce", "messenger"]);
        let got: Vec<TypedValue> = ev.pairs.into_iter().map(|p| p.value).collect();
        assert_eq!(got, values);
    }

    #[test]
    fn decode_rejects_mismatches() {
        let decl = parse_event_signature("E (uint256 a, index_topic_1 address b)").unwrap();
        let other = parse_event_signature("F (uint256 a, index_topic_1 address b)").unwrap();
        let log = encode_event(
            &decl,
            Address::ZERO,
            &[TypedValue::Numeric(Amount::from(3u64)), TypedValue::Address(Address([1; 20]))],
        )
        .unwrap();
        assert!(matches!(
            decode_event(&log, &other),
            Err(LedgerError::SignatureMismatch)
        ));
        let mut short = log.clone();
        short.topics.pop();
        assert!(matches!(decode_event(&short, &decl), Err(LedgerError::Decode(_))));
        let mut bad_data = log;
        bad_data.data.0.pop();
        assert!(matches!(decode_event(&bad_data, &decl), Err(LedgerError::Decode(_))));
    }

    #[test]
    fn uint_width_is_enforced_on_encode() {
        let decl = parse_event_signature("E (uint32 a)").unwrap();
        let too_big = TypedValue::Numeric(Amount::from(1u64 << 33));
        assert!(encode_event(&decl, Address::ZERO, &[too_big]).is_err());
        let ok = TypedValue::Numeric(Amount::from(u32::MAX as u64));
        assert!(encode_event(&decl, Address::ZERO, &[ok]).is_ok());
    }
}
