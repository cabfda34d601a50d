//! Identifier tokenization: the unit the sequence labeler and keyword
//! analysis operate on.

use super::types::EventDecl;

/// Separator inserted between the token runs of consecutive parameters so
/// the sequence labeler can learn parameter boundaries.
pub const BOUNDARY_TOKEN: &str = "|";

/// Token sequence of a declaration: each parameter name tokenized in order,
/// boundary tokens between parameters, plus the half-open token span of
/// each parameter.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DeclTokens {
    pub tokens: Vec<String>,
    pub param_spans: Vec<(usize, usize)>,
}

pub fn declaration_tokens(decl: &EventDecl) -> DeclTokens {
    let mut tokens = Vec::new();
    let mut param_spans = Vec::with_capacity(decl.params.len());
    for (i, param) in decl.params.iter().enumerate() {
        if i > 0 {
            tokens.push(BOUNDARY_TOKEN.to_string());
        }
        let start = tokens.len();
        tokens.extend(tokenize_identifier(&param.name));
        param_spans.push((start, tokens.len()));
    }
    DeclTokens { tokens, param_spans }
}

/// Splits an identifier into lowercase tokens on camelCase humps,
/// digit/letter boundaries, and underscores, preserving order.
///
/// `"destinationChainId"` becomes `["destination", "chain", "id"]`,
/// `"relayerFeePct"` becomes `["relayer", "fee", "pct"]`.
pub fn tokenize_identifier(name: &str) -> Vec<String> {
    let chars: Vec<char> = name.chars().collect();
    let mut tokens = Vec::new();
    let mut current = String::new();

    for (i, &c) in chars.iter().enumerate() {
        if !c.is_ascii_alphanumeric() {
            if !current.is_empty() {
                tokens.push(std::mem::take(&mut current));
            }
            continue;
        }
        if !current.is_empty() {
            let prev = *chars[..i]
                .iter()
                .rev()
                .find(|p| p.is_ascii_alphanumeric())
                .unwrap();
            let next_lower = chars.get(i + 1).is_some_and(|n| n.is_ascii_lowercase());
            let boundary = (c.is_ascii_uppercase()
                && (prev.is_ascii_lowercase() || prev.is_ascii_digit()))
                || (c.is_ascii_uppercase() && prev.is_ascii_uppercase() && next_lower)
                || (c.is_ascii_digit() && prev.is_ascii_alphabetic())
                || (c.is_ascii_lowercase() && prev.is_ascii_digit());
            if boundary {
                tokens.push(std::mem::take(&mut current));
            }
        }
        current.push(c.to_ascii_lowercase());
    }
    if !current.is_empty() {
        tokens.push(current);
    }
    tokens
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(s: &str) -> Vec<String> {
        tokenize_identifier(s)
    }

    #[test]
    fn splits_camel_case() {
        assert_eq!(toks("destinationChainId"), ["destination", "chain", "id"]);
        assert_eq!(toks("originChainId"), ["origin", "chain", "id"]);
        assert_eq!(toks("relayerFeePct"), ["relayer", "fee", "pct"]);
    }

    #[test]
    fn splits_underscores_and_digits() {
        assert_eq!(toks("src_chain_id"), ["src", "chain", "id"]);
        assert_eq!(toks("topic1"), ["topic", "1"]);
        assert_eq!(toks("ERC20Token"), ["erc", "20", "token"]);
        assert_eq!(toks("chainID"), ["chain", "id"]);
    }

    #[test]
    fn idempotent_on_joined_output() {
        for name in ["destinationChainId", "relayerFeePct", "ERC20Token", "a1b2C3"] {
            let first = toks(name);
            let joined = first.join("_");
            assert_eq!(toks(&joined), first, "not idempotent for {name}");
        }
    }

    #[test]
    fn degenerate_inputs() {
        assert!(toks("").is_empty());
        assert!(toks("__").is_empty());
        assert_eq!(toks("x"), ["x"]);
    }

    #[test]
    fn declaration_token_spans() {
        let decl = crate::ledger::abi::parse_event_signature(
            "E (uint256 sendAmount, address toAddr)",
        )
        .unwrap();
        let dt = declaration_tokens(&decl);
        assert_eq!(dt.tokens, ["send", "amount", "|", "to", "addr"]);
        assert_eq!(dt.param_spans, [(0, 2), (3, 5)]);
        let empty = crate::ledger::abi::parse_event_signature("E ()").unwrap();
        assert!(declaration_tokens(&empty).tokens.is_empty());
    }
}
