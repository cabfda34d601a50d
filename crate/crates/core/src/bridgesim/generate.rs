//! Deterministic multi-chain world generation: labeled cross-chain pairs
//! under several bridge mechanisms, non-cross-chain noise, and injected
//! attack anomalies. All randomness flows from a single seed through one
//! ChaCha20 stream, so a seed fully determines the dataset bytes.

use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use super::config::{
    AttackKind, AttackTemplate, BridgeSpec, CueKind, Mechanism, SimError, Vocab, WorldConfig,
};
use super::dataset::{LabeledDataset, NerAnnotation, PairLabel, Split};
use crate::ledger::{
    declaration_text, declaration_tokens, encode_event, is_token_transfer, parse_event_signature,
    AbiRegistry, AbiType, Address, Amount, B256, ChainId, EventDecl, EventParam, HexBytes,
    RawLog, Transaction, TxHash, TxStatus, TypedValue,
};
use crate::locate::tags::Tag;

pub const WORLD_EPOCH: u64 = 1_700_000_000;
pub const AMOUNT_MIN: u128 = 1_000_000_000_000_000; // 1e15
pub const AMOUNT_MAX: u128 = 1_000_000_000_000_000_000_000; // 1e21

/// Seconds per block, a pure function of the chain id so that block
/// assignment is stable across generation and attack injection.
pub fn block_time(chain: ChainId) -> u64 {
    const TIMES: [u64; 6] = [12, 3, 2, 6, 15, 4];
    TIMES[(chain.0 % 6) as usize]
}

// ---------------------------------------------------------------------------
// Naming pools. Pools are laid out so that alternating picks (the unseen-
// bridge experiment trains on even indices) keep every token of the held-out
// names covered by the training vocabulary.

const DST_CHAIN_NAMES: [&str; 12] = [
    "destinationChainId", "destinationChain", "toChainId", "toChain",
    "dstChainId", "chainIdTo", "targetChainId", "targetChain",
    "remoteChainId", "dstChain", "receiverChainId", "remoteChain",
];
const SRC_CHAIN_NAMES: [&str; 12] = [
    "originChainId", "originChain", "fromChainId", "fromChain",
    "srcChainId", "chainIdFrom", "sourceChainId", "sourceChain",
    "homeChainId", "srcChain", "senderChainId", "homeChain",
];
const SENDER_NAMES: [&str; 12] = [
    "depositor", "depositorAddress", "sender", "senderAddress",
    "fromAddress", "fromAccount", "originSender", "originDepositor",
    "srcAccount", "srcSender", "initiator", "initiatorAccount",
];
const RECIPIENT_NAMES: [&str; 12] = [
    "recipient", "recipientAddress", "receiver", "receiverAccount",
    "toAddress", "toAccount", "beneficiary", "beneficiaryAddress",
    "targetAccount", "targetReceiver", "payee", "payeeAddress",
];
const AMOUNT_NAMES: [&str; 12] = [
    "amount", "tokenValue", "value", "valueAmount",
    "tokenAmount", "sendValue", "lockAmount", "lockValue",
    "sendAmount", "bridgedValue", "bridgedAmount", "bridgedTokenValue",
];
const NONCE_NAMES: [&str; 12] = [
    "nonce", "transferId", "messageId", "depositId", "sequence", "messengerNonce",
    "xferNonce", "requestId", "crossNonce", "bridgeNonce", "eventNonce", "depositNonce",
];
const MESSENGER_NAMES: [&str; 6] =
    ["messenger", "validator", "oracle", "relayNode", "attestor", "guardian"];
const TRANSFER_ID_NAMES: [&str; 6] =
    ["transferHash", "commitmentId", "xferDigest", "proofId", "bundleHash", "routeDigest"];
const DEPOSIT_EVENT_NAMES: [&str; 12] = [
    "FundsDeposited", "TokensDeposited", "TokensLocked", "FundsLocked",
    "DepositInitiated", "TransferInitiated", "SendRequested", "DepositRequested",
    "BridgeOutbound", "CrossSendStarted", "CrossTransferStarted", "BridgeTransferOutbound",
];
const WITHDRAWAL_EVENT_NAMES: [&str; 12] = [
    "FundsWithdrawn", "TokensWithdrawn", "TokensMinted", "FundsMinted",
    "WithdrawalFinalized", "TransferFinalized", "ReceiveCompleted", "WithdrawalCompleted",
    "BridgeInbound", "CrossReceiveFinalized", "CrossTransferCompleted", "BridgeTransferInbound",
];
const FILLER_NUMERIC: [(&str, u16); 8] = [
    ("deadline", 256),
    ("gasLimit", 256),
    ("quoteTimestamp", 32),
    ("relayerFeePct", 64),
    ("slippageBps", 256),
    ("minOut", 256),
    ("maxFee", 64),
    ("batchIndex", 32),
];
const FILLER_ADDRESS: [&str; 5] = ["token", "pool", "referrer", "feeCollector", "operator"];
const MEMO_WORDS: [&str; 6] = ["bridge", "swap", "route", "relay", "hop", "transfer"];
const BRIDGE_NAMES: [&str; 12] = [
    "amber", "basalt", "cobalt", "drift", "ember", "flint",
    "garnet", "halite", "iris", "jasper", "krypton", "lumen",
];

/// The default world: 12 bridges across all three mechanisms with distinct
/// vocabularies, 3 chains, 2040 labeled pairs, 3x noise, and a dozen of
/// each attack kind.
pub fn default_config(seed: u64) -> WorldConfig {
    let mut bridges = Vec::new();
    let fee_ppm: [u64; 12] =
        [0, 1000, 3000, 5000, 8000, 10_000, 15_000, 20_000, 25_000, 30_000, 500, 2000];
    let latency: [(u64, u64); 12] = [
        (30, 600), (60, 900), (30, 1800), (120, 1200), (30, 300), (60, 1500),
        (30, 900), (300, 1800), (60, 600), (30, 1200), (120, 1740), (30, 450),
    ];
    for i in 0..12 {
        let mechanism = match i % 3 {
            0 => Mechanism::LockMint,
            1 => Mechanism::BurnUnlock,
            _ => Mechanism::LiquidityPool,
        };
        let mut implicit_cues = vec![super::config::CueTemplate {
            name: NONCE_NAMES[i].to_string(),
            kind: CueKind::Nonce,
        }];
        if i % 2 == 0 {
            implicit_cues.push(super::config::CueTemplate {
                name: MESSENGER_NAMES[i % 6].to_string(),
                kind: CueKind::Messenger,
            });
        }
        if i % 3 == 0 {
            implicit_cues.push(super::config::CueTemplate {
                name: TRANSFER_ID_NAMES[i % 6].to_string(),
                kind: CueKind::TransferId,
            });
        }
        bridges.push(BridgeSpec {
            name: BRIDGE_NAMES[i].to_string(),
            mechanism,
            fee_rate: fee_ppm[i] as f64 / 1e6,
            latency: latency[i],
            vocab: Vocab {
                src_chain: SRC_CHAIN_NAMES[i].to_string(),
                dst_chain: DST_CHAIN_NAMES[i].to_string(),
                sender: SENDER_NAMES[i].to_string(),
                recipient: RECIPIENT_NAMES[i].to_string(),
                amount: AMOUNT_NAMES[i].to_string(),
                nonce_cue: NONCE_NAMES[i].to_string(),
            },
            implicit_cues,
        });
    }
    WorldConfig {
        seed,
        chains: vec![ChainId(1), ChainId(56), ChainId(137)],
        n_pairs_per_bridge: 170,
        noise_ratio: 3.0,
        bridges,
        attacks: vec![
            AttackTemplate { kind: AttackKind::ZeroDeposit, count: 12 },
            AttackTemplate { kind: AttackKind::UnburnedWrap, count: 12 },
            AttackTemplate { kind: AttackKind::InflatedWithdrawal, count: 12 },
        ],
    }
}

// ---------------------------------------------------------------------------

fn rand_address(rng: &mut ChaCha20Rng) -> Address {
    let mut a = [0u8; 20];
    rng.fill(&mut a);
    Address(a)
}

fn rand_hash(rng: &mut ChaCha20Rng, used: &mut BTreeSet<B256>) -> B256 {
    loop {
        let mut h = [0u8; 32];
        rng.fill(&mut h);
        let hash = B256(h);
        if used.insert(hash) {
            return hash;
        }
    }
}

fn log_uniform_amount(rng: &mut ChaCha20Rng) -> u128 {
    let lo = (AMOUNT_MIN as f64).ln();
    let hi = (AMOUNT_MAX as f64).ln();
    let v = rng.random_range(lo..hi).exp() as u128;
    v.clamp(AMOUNT_MIN, AMOUNT_MAX)
}

fn fee_for(amount: u128, fee_ppm: u64) -> u128 {
    amount * fee_ppm as u128 / 1_000_000
}

struct BridgeInfra {
    spec: BridgeSpec,
    routers: BTreeMap<ChainId, Address>,
    tokens: BTreeMap<ChainId, Address>,
    relayer: Address,
    deposit_decl: EventDecl,
    withdrawal_decl: EventDecl,
    /// Fixed per-bridge values for Messenger-kind cues.
    messenger_values: BTreeMap<String, Address>,
}

struct User {
    addr: Address,
    recv: Address,
    src: ChainId,
    dst: ChainId,
    next_time: u64,
}

/// Builds an event declaration from role parameters plus cue and filler
/// fields, in a per-bridge shuffled order with up to three indexed slots.
fn build_decl(
    rng: &mut ChaCha20Rng,
    name: &str,
    roles: Vec<(String, AbiType)>,
    cues: &[super::config::CueTemplate],
    with_memo: bool,
) -> EventDecl {
    let mut params: Vec<(String, AbiType)> = roles;
    for cue in cues {
        let ty = match cue.kind {
            CueKind::Nonce => AbiType::Uint(256),
            CueKind::Messenger => AbiType::Address,
            CueKind::TransferId => AbiType::Bytes,
        };
        params.push((cue.name.clone(), ty));
    }
    let n_fillers = rng.random_range(2..=4usize);
    let mut filler_pool: Vec<(String, AbiType)> = FILLER_NUMERIC
        .iter()
        .map(|(n, bits)| (n.to_string(), AbiType::Uint(*bits)))
        .chain(FILLER_ADDRESS.iter().map(|n| (n.to_string(), AbiType::Address)))
        .collect();
    for _ in 0..n_fillers {
        let idx = rng.random_range(0..filler_pool.len());
        let filler = filler_pool.swap_remove(idx);
        if params.iter().all(|(n, _)| *n != filler.0) {
            params.push(filler);
        }
    }
    if with_memo {
        params.push(("memo".to_string(), AbiType::Str));
    }
    // Shuffle parameter order per bridge.
    for i in (1..params.len()).rev() {
        let j = rng.random_range(0..=i);
        params.swap(i, j);
    }
    let mut indexed_left = 3;
    let params = params
        .into_iter()
        .map(|(pname, ty)| {
            let indexed = indexed_left > 0 && rng.random_range(0.0..1.0) < 0.25;
            if indexed {
                indexed_left -= 1;
            }
            EventParam { name: pname, abi_type: ty, indexed }
        })
        .collect();
    EventDecl { name: name.to_string(), params }
}

fn setup_bridge(
    rng: &mut ChaCha20Rng,
    index: usize,
    spec: &BridgeSpec,
    chains: &[ChainId],
) -> BridgeInfra {
    let mut routers = BTreeMap::new();
    let mut tokens = BTreeMap::new();
    for &chain in chains {
        routers.insert(chain, rand_address(rng));
        tokens.insert(chain, rand_address(rng));
    }
    let relayer = rand_address(rng);
    let mut messenger_values = BTreeMap::new();
    for cue in &spec.implicit_cues {
        if cue.kind == CueKind::Messenger {
            messenger_values.insert(cue.name.clone(), rand_address(rng));
        }
    }

    let v = &spec.vocab;
    let mut deposit_roles: Vec<(String, AbiType)> = vec![
        (v.amount.clone(), AbiType::Uint(256)),
        (v.dst_chain.clone(), AbiType::Uint(256)),
        (v.recipient.clone(), AbiType::Address),
    ];
    if rng.random_range(0.0..1.0) < 0.6 {
        deposit_roles.push((v.src_chain.clone(), AbiType::Uint(256)));
    }
    if rng.random_range(0.0..1.0) < 0.6 {
        deposit_roles.push((v.sender.clone(), AbiType::Address));
    }
    let with_memo = index % 4 == 0;
    let deposit_decl = build_decl(
        rng,
        DEPOSIT_EVENT_NAMES[index % DEPOSIT_EVENT_NAMES.len()],
        deposit_roles,
        &spec.implicit_cues,
        with_memo,
    );

    let mut withdrawal_roles: Vec<(String, AbiType)> = vec![
        (v.amount.clone(), AbiType::Uint(256)),
        (v.src_chain.clone(), AbiType::Uint(256)),
        (v.sender.clone(), AbiType::Address),
    ];
    if rng.random_range(0.0..1.0) < 0.6 {
        withdrawal_roles.push((v.dst_chain.clone(), AbiType::Uint(256)));
    }
    if rng.random_range(0.0..1.0) < 0.6 {
        withdrawal_roles.push((v.recipient.clone(), AbiType::Address));
    }
    let withdrawal_decl = build_decl(
        rng,
        WITHDRAWAL_EVENT_NAMES[index % WITHDRAWAL_EVENT_NAMES.len()],
        withdrawal_roles,
        &spec.implicit_cues,
        false,
    );

    BridgeInfra {
        spec: spec.clone(),
        routers,
        tokens,
        relayer,
        deposit_decl,
        withdrawal_decl,
        messenger_values,
    }
}

fn filler_value(rng: &mut ChaCha20Rng, ty: AbiType) -> TypedValue {
    match ty {
        AbiType::Uint(bits) => {
            let cap = 1u64 << bits.min(48);
            TypedValue::Numeric(Amount::from(rng.random_range(1..cap)))
        }
        AbiType::Address => TypedValue::Address(rand_address(rng)),
        AbiType::Bool => TypedValue::Bool(rng.random_range(0.0..1.0) < 0.5),
        AbiType::Str => {
            TypedValue::Text(MEMO_WORDS[rng.random_range(0..MEMO_WORDS.len())].to_string())
        }
        AbiType::Bytes => {
            let mut b = [0u8; 32];
            rng.fill(&mut b);
            TypedValue::Bytes(b.to_vec())
        }
    }
}

fn event_values(
    rng: &mut ChaCha20Rng,
    decl: &EventDecl,
    assigned: &BTreeMap<&str, TypedValue>,
) -> Vec<TypedValue> {
    decl.params
        .iter()
        .map(|p| {
            assigned
                .get(p.name.as_str())
                .cloned()
                .unwrap_or_else(|| filler_value(rng, p.abi_type))
        })
        .collect()
}

fn transfer_log(token: Address, from: Address, to: Address, amount: u128) -> RawLog {
    let decl = erc20_transfer_decl();
    encode_event(
        &decl,
        token,
        &[
            TypedValue::Address(from),
            TypedValue::Address(to),
            TypedValue::Numeric(Amount::from_u128(amount)),
        ],
    )
    .expect("static transfer encoding")
}

fn erc20_transfer_decl() -> EventDecl {
    parse_event_signature(
        "Transfer (index_topic_1 address from, index_topic_2 address to, uint256 value)",
    )
    .expect("static declaration")
}

fn erc20_approval_decl() -> EventDecl {
    parse_event_signature(
        "Approval (index_topic_1 address owner, index_topic_2 address spender, uint256 value)",
    )
    .expect("static declaration")
}

fn dex_swap_decl() -> EventDecl {
    parse_event_signature(
        "Swap (index_topic_1 address sender, uint256 amountIn, uint256 amountOut, \
         index_topic_2 address to)",
    )
    .expect("static declaration")
}

struct WorldBuilder {
    chains: Vec<ChainId>,
    txs: Vec<Transaction>,
    pairs: Vec<PairLabel>,
    abis: AbiRegistry,
    annotations: Vec<NerAnnotation>,
    used_hashes: BTreeSet<B256>,
}

impl WorldBuilder {
    fn push_tx(&mut self, tx: Transaction) {
        self.txs.push(tx);
    }
}

struct PairTxs {
    deposit: Transaction,
    withdrawal: Transaction,
}

/// Builds the two transactions of one cross-chain pair. `event_amount` is
/// what the deposit event claims; `moved` is what actually moves on the
/// source chain (they differ only for attacks).
#[allow(clippy::too_many_arguments)]
fn build_pair_txs(
    rng: &mut ChaCha20Rng,
    used: &mut BTreeSet<B256>,
    infra: &BridgeInfra,
    user: Address,
    recv: Address,
    src: ChainId,
    dst: ChainId,
    t_dep: u64,
    t_wd: u64,
    event_amount: u128,
    moved: u128,
    w_amount: u128,
) -> PairTxs {
    let mut assigned: BTreeMap<&str, TypedValue> = BTreeMap::new();
    let v = &infra.spec.vocab;
    assigned.insert(v.amount.as_str(), TypedValue::Numeric(Amount::from_u128(event_amount)));
    assigned.insert(v.src_chain.as_str(), TypedValue::Numeric(Amount::from(src.0)));
    assigned.insert(v.dst_chain.as_str(), TypedValue::Numeric(Amount::from(dst.0)));
    assigned.insert(v.sender.as_str(), TypedValue::Address(user));
    assigned.insert(v.recipient.as_str(), TypedValue::Address(recv));
    for cue in &infra.spec.implicit_cues {
        let value = match cue.kind {
            CueKind::Nonce => TypedValue::Numeric(Amount::from(rng.random::<u64>())),
            CueKind::Messenger => TypedValue::Address(infra.messenger_values[&cue.name]),
            CueKind::TransferId => {
                let mut b = [0u8; 32];
                rng.fill(&mut b);
                TypedValue::Bytes(b.to_vec())
            }
        };
        assigned.insert(cue.name.as_str(), value);
    }

    let router_src = infra.routers[&src];
    let router_dst = infra.routers[&dst];
    let token_src = infra.tokens[&src];
    let token_dst = infra.tokens[&dst];

    let mut deposit_logs = Vec::new();
    let mut deposit_value = Amount::zero();
    match infra.spec.mechanism {
        Mechanism::LockMint => {
            deposit_value = Amount::from_u128(moved);
        }
        Mechanism::BurnUnlock => {
            if moved > 0 {
                deposit_logs.push(transfer_log(token_src, user, Address::ZERO, moved));
            }
        }
        Mechanism::LiquidityPool => {
            if moved > 0 {
                deposit_logs.push(transfer_log(token_src, user, router_src, moved));
            }
        }
    }
    let dep_values = event_values(rng, &infra.deposit_decl, &assigned);
    deposit_logs.push(
        encode_event(&infra.deposit_decl, router_src, &dep_values).expect("deposit encoding"),
    );

    let mut input = vec![0u8; 4 + 32];
    rng.fill(&mut input[..]);
    let deposit = Transaction {
        chain: src,
        tx_hash: rand_hash(rng, used),
        block_number: 0,
        timestamp: t_dep,
        from_addr: user,
        to_addr: Some(router_src),
        value: deposit_value,
        input_data: HexBytes(input),
        status: TxStatus::Success,
        logs: deposit_logs,
        internal_transfers: Vec::new(),
    };

    // The withdrawal event reports the paid-out amount.
    assigned.insert(v.amount.as_str(), TypedValue::Numeric(Amount::from_u128(w_amount)));
    let wd_values = event_values(rng, &infra.withdrawal_decl, &assigned);
    let mut wd_logs =
        vec![encode_event(&infra.withdrawal_decl, router_dst, &wd_values).expect("withdrawal")];
    let mut wd_internal = Vec::new();
    match infra.spec.mechanism {
        Mechanism::LockMint => {
            wd_logs.push(transfer_log(token_dst, Address::ZERO, recv, w_amount));
        }
        Mechanism::BurnUnlock => {
            wd_internal.push(crate::ledger::InternalTransfer {
                from: router_dst,
                to: recv,
                token: crate::ledger::TokenRef::Native,
                amount: Amount::from_u128(w_amount),
            });
        }
        Mechanism::LiquidityPool => {
            wd_logs.push(transfer_log(token_dst, router_dst, recv, w_amount));
        }
    }
    let mut input = vec![0u8; 4 + 64];
    rng.fill(&mut input[..]);
    let withdrawal = Transaction {
        chain: dst,
        tx_hash: rand_hash(rng, used),
        block_number: 0,
        timestamp: t_wd,
        from_addr: infra.relayer,
        to_addr: Some(router_dst),
        value: Amount::zero(),
        input_data: HexBytes(input),
        status: TxStatus::Success,
        logs: wd_logs,
        internal_transfers: wd_internal,
    };

    PairTxs { deposit, withdrawal }
}

/// Gold tags for a declaration, given the owning bridge's vocabulary (or
/// keyword semantics for bridge-less noise events).
fn gold_tags(decl: &EventDecl, vocab: Option<&Vocab>) -> Vec<String> {
    let dt = declaration_tokens(decl);
    let mut tags = vec![Tag::O; dt.tokens.len()];
    for (param, span) in decl.params.iter().zip(&dt.param_spans) {
        let tag = match vocab {
            Some(v) => {
                if param.name == v.src_chain {
                    Tag::SrcChain
                } else if param.name == v.dst_chain {
                    Tag::DstChain
                } else if param.name == v.sender {
                    Tag::SrcAddr
                } else if param.name == v.recipient {
                    Tag::DstAddr
                } else if param.name == v.amount {
                    Tag::Amount
                } else {
                    Tag::O
                }
            }
            None => match param.name.as_str() {
                "from" | "sender" => Tag::SrcAddr,
                "to" => Tag::DstAddr,
                "value" | "amountIn" | "amountOut" => Tag::Amount,
                _ => Tag::O,
            },
        };
        for slot in tags.iter_mut().take(span.1).skip(span.0) {
            *slot = tag;
        }
    }
    tags.into_iter().map(|t| t.as_str().to_string()).collect()
}

fn push_annotation(builder: &mut WorldBuilder, decl: &EventDecl, bridge: Option<&str>, vocab: Option<&Vocab>) {
    let signature = declaration_text(decl);
    if builder.annotations.iter().any(|a| a.signature == signature) {
        return;
    }
    builder.annotations.push(NerAnnotation {
        signature,
        tags: gold_tags(decl, vocab),
        bridge: bridge.map(str::to_string),
    });
}

/// Generates the benign world plus configured attacks. Deterministic in
/// `config.seed`.
pub fn generate(config: &WorldConfig) -> Result<LabeledDataset, SimError> {
    config.validate()?;
    let mut rng = ChaCha20Rng::seed_from_u64(config.seed);
    let total_pairs = config.bridges.len() * config.n_pairs_per_bridge;
    let span_s = (total_pairs as u64 * 240).max(86_400);

    let mut builder = WorldBuilder {
        chains: config.chains.clone(),
        txs: Vec::new(),
        pairs: Vec::new(),
        abis: AbiRegistry::new(),
        annotations: Vec::new(),
        used_hashes: BTreeSet::new(),
    };

    // Bridge infrastructure.
    let infras: Vec<BridgeInfra> = config
        .bridges
        .iter()
        .enumerate()
        .map(|(i, spec)| setup_bridge(&mut rng, i, spec, &config.chains))
        .collect();
    for infra in &infras {
        for &router in infra.routers.values() {
            builder.abis.register(router, infra.deposit_decl.clone());
            builder.abis.register(router, infra.withdrawal_decl.clone());
        }
        for &token in infra.tokens.values() {
            builder.abis.register(token, erc20_transfer_decl());
            builder.abis.register(token, erc20_approval_decl());
        }
        push_annotation(&mut builder, &infra.deposit_decl, Some(&infra.spec.name), Some(&infra.spec.vocab));
        push_annotation(&mut builder, &infra.withdrawal_decl, Some(&infra.spec.name), Some(&infra.spec.vocab));
    }

    // Noise infrastructure: a DEX router and two extra tokens per chain.
    let mut dex: BTreeMap<ChainId, Address> = BTreeMap::new();
    let mut noise_tokens: BTreeMap<ChainId, Vec<Address>> = BTreeMap::new();
    for &chain in &config.chains {
        let router = rand_address(&mut rng);
        builder.abis.register(router, dex_swap_decl());
        dex.insert(chain, router);
        let toks = vec![rand_address(&mut rng), rand_address(&mut rng)];
        for &t in &toks {
            builder.abis.register(t, erc20_transfer_decl());
            builder.abis.register(t, erc20_approval_decl());
        }
        noise_tokens.insert(chain, toks);
    }
    push_annotation(&mut builder, &erc20_transfer_decl(), None, None);
    push_annotation(&mut builder, &erc20_approval_decl(), None, None);
    push_annotation(&mut builder, &dex_swap_decl(), None, None);

    // Benign pairs, bridge by bridge. Users repeat within a bridge so that
    // candidate windows overlap and ranking has real work to do.
    for infra in &infras {
        let n_pairs = config.n_pairs_per_bridge;
        let n_users = (n_pairs / 3).max(1);
        let mut users: Vec<User> = (0..n_users)
            .map(|_| {
                let src = config.chains[rng.random_range(0..config.chains.len())];
                let mut dst = config.chains[rng.random_range(0..config.chains.len())];
                while dst == src {
                    dst = config.chains[rng.random_range(0..config.chains.len())];
                }
                User {
                    addr: rand_address(&mut rng),
                    recv: rand_address(&mut rng),
                    src,
                    dst,
                    next_time: WORLD_EPOCH + rng.random_range(0..span_s.saturating_sub(7200)),
                }
            })
            .collect();
        for k in 0..n_pairs {
            let user = &mut users[k % n_users];
            let (src, dst) = if rng.random_range(0.0..1.0) < 0.2 {
                let src = config.chains[rng.random_range(0..config.chains.len())];
                let mut dst = config.chains[rng.random_range(0..config.chains.len())];
                while dst == src {
                    dst = config.chains[rng.random_range(0..config.chains.len())];
                }
                (src, dst)
            } else {
                (user.src, user.dst)
            };
            user.next_time += rng.random_range(180..1500);
            let t_dep = user.next_time.min(WORLD_EPOCH + span_s);
            let latency = rng.random_range(infra.spec.latency.0..=infra.spec.latency.1);
            let t_wd = t_dep + latency;
            let amount = log_uniform_amount(&mut rng);
            let w_amount = amount - fee_for(amount, infra.spec.fee_ppm());
            let txs = build_pair_txs(
                &mut rng,
                &mut builder.used_hashes,
                infra,
                user.addr,
                user.recv,
                src,
                dst,
                t_dep,
                t_wd,
                amount,
                amount,
                w_amount,
            );
            builder.pairs.push(PairLabel {
                src_chain: src,
                src_tx: txs.deposit.tx_hash,
                dst_chain: dst,
                dst_tx: txs.withdrawal.tx_hash,
                bridge: infra.spec.name.clone(),
                is_attack: false,
                attack_kind: None,
            });
            builder.push_tx(txs.deposit);
            builder.push_tx(txs.withdrawal);
        }
    }

    // Attacks: cloned bridge machinery with violated amount rules.
    let mut attack_count = 0usize;
    for template in &config.attacks {
        for _ in 0..template.count {
            let infra = &infras[attack_count % infras.len()];
            attack_count += 1;
            let user = rand_address(&mut rng);
            let recv = rand_address(&mut rng);
            let src = config.chains[rng.random_range(0..config.chains.len())];
            let mut dst = config.chains[rng.random_range(0..config.chains.len())];
            while dst == src {
                dst = config.chains[rng.random_range(0..config.chains.len())];
            }
            let t_dep = WORLD_EPOCH + rng.random_range(0..span_s);
            let latency = rng.random_range(infra.spec.latency.0..=infra.spec.latency.1);
            let amount = log_uniform_amount(&mut rng);
            let (event_amount, moved, w_amount) = match template.kind {
                AttackKind::ZeroDeposit => (0, 0, amount),
                AttackKind::UnburnedWrap => (amount, 0, amount),
                AttackKind::InflatedWithdrawal => (amount, amount, amount.saturating_mul(5)),
            };
            let txs = build_pair_txs(
                &mut rng,
                &mut builder.used_hashes,
                infra,
                user,
                recv,
                src,
                dst,
                t_dep,
                t_dep + latency,
                event_amount,
                moved,
                w_amount,
            );
            builder.pairs.push(PairLabel {
                src_chain: src,
                src_tx: txs.deposit.tx_hash,
                dst_chain: dst,
                dst_tx: txs.withdrawal.tx_hash,
                bridge: infra.spec.name.clone(),
                is_attack: true,
                attack_kind: Some(template.kind),
            });
            builder.push_tx(txs.deposit);
            builder.push_tx(txs.withdrawal);
        }
    }

    // Non-cross-chain noise: plain transfers, token transfers, approvals,
    // DEX swaps, and failed transactions. A slice of it is anchored near
    // labeled pairs so candidate windows contain distractors.
    let n_cross = builder.txs.len();
    let n_noise = (config.noise_ratio * n_cross as f64).round() as usize;
    let benign_pairs: Vec<(usize, ChainId, Address, ChainId, Address, u64)> = builder
        .pairs
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let dep = builder.txs[2 * i].clone();
            (i, p.src_chain, dep.from_addr, p.dst_chain, Address::ZERO, dep.timestamp)
        })
        .collect();
    let pair_recvs: Vec<(ChainId, Address, u64, u64)> = builder
        .pairs
        .iter()
        .enumerate()
        .map(|(i, _)| {
            let dep = &builder.txs[2 * i];
            let wd = &builder.txs[2 * i + 1];
            // recv is whatever the withdrawal pays; recover it from its key
            // role: the address the withdrawal transfers to.
            let recv = wd
                .internal_transfers
                .first()
                .map(|t| t.to)
                .unwrap_or_else(|| {
                    wd.logs
                        .iter()
                        .find_map(|log| {
                            let decl = builder.abis.decl_for(log)?;
                            if !is_token_transfer(decl) {
                                return None;
                            }
                            let ev = crate::ledger::decode_event(log, decl).ok()?;
                            match ev.pairs[1].value {
                                TypedValue::Address(a) => Some(a),
                                _ => None,
                            }
                        })
                        .unwrap_or(Address::ZERO)
                });
            (wd.chain, recv, dep.timestamp, wd.timestamp)
        })
        .collect();

    for _ in 0..n_noise {
        let roll: f64 = rng.random_range(0.0..1.0);
        let anchored = rng.random_range(0.0..1.0) < 0.2 && !builder.pairs.is_empty();
        let (chain, from, to, t) = if anchored {
            let idx = rng.random_range(0..builder.pairs.len());
            if rng.random_range(0.0..1.0) < 0.5 {
                // Destination-side distractor touching the pair's recipient.
                let (chain, recv, dep_t, _) = pair_recvs[idx];
                let t = dep_t + rng.random_range(1..=1800u64);
                (chain, rand_address(&mut rng), recv, t)
            } else {
                // Source-side distractor sent from the pair's depositor.
                let (_, src_chain, depositor, _, _, dep_t) = benign_pairs[idx];
                let t = dep_t.saturating_sub(rng.random_range(1..=1800u64)).max(WORLD_EPOCH);
                (src_chain, depositor, rand_address(&mut rng), t)
            }
        } else {
            let chain = config.chains[rng.random_range(0..config.chains.len())];
            (
                chain,
                rand_address(&mut rng),
                rand_address(&mut rng),
                WORLD_EPOCH + rng.random_range(0..span_s + 3600),
            )
        };
        let hash = rand_hash(&mut rng, &mut builder.used_hashes);
        let amount = log_uniform_amount(&mut rng);
        let tx = if roll < 0.45 {
            Transaction {
                chain,
                tx_hash: hash,
                block_number: 0,
                timestamp: t,
                from_addr: from,
                to_addr: Some(to),
                value: Amount::from_u128(amount),
                input_data: HexBytes(Vec::new()),
                status: TxStatus::Success,
                logs: vec![],
                internal_transfers: vec![],
            }
        } else if roll < 0.60 {
            let token = noise_tokens[&chain][rng.random_range(0..2)];
            Transaction {
                chain,
                tx_hash: hash,
                block_number: 0,
                timestamp: t,
                from_addr: from,
                to_addr: Some(token),
                value: Amount::zero(),
                input_data: HexBytes(vec![0xa9, 0x05, 0x9c, 0xbb]),
                status: TxStatus::Success,
                logs: vec![transfer_log(token, from, to, amount)],
                internal_transfers: vec![],
            }
        } else if roll < 0.75 {
            let token = noise_tokens[&chain][rng.random_range(0..2)];
            let log = encode_event(
                &erc20_approval_decl(),
                token,
                &[
                    TypedValue::Address(from),
                    TypedValue::Address(to),
                    TypedValue::Numeric(Amount::from_u128(amount)),
                ],
            )
            .expect("approval encoding");
            Transaction {
                chain,
                tx_hash: hash,
                block_number: 0,
                timestamp: t,
                from_addr: from,
                to_addr: Some(token),
                value: Amount::zero(),
                input_data: HexBytes(vec![0x09, 0x5e, 0xa7, 0xb3]),
                status: TxStatus::Success,
                logs: vec![log],
                internal_transfers: vec![],
            }
        } else if roll < 0.90 {
            let router = dex[&chain];
            let toks = &noise_tokens[&chain];
            let out_amount = amount / rng.random_range(2..5) as u128;
            let swap = encode_event(
                &dex_swap_decl(),
                router,
                &[
                    TypedValue::Address(from),
                    TypedValue::Numeric(Amount::from_u128(amount)),
                    TypedValue::Numeric(Amount::from_u128(out_amount)),
                    TypedValue::Address(to),
                ],
            )
            .expect("swap encoding");
            Transaction {
                chain,
                tx_hash: hash,
                block_number: 0,
                timestamp: t,
                from_addr: from,
                to_addr: Some(router),
                value: Amount::zero(),
                input_data: HexBytes(vec![0x38, 0xed, 0x17, 0x39]),
                status: TxStatus::Success,
                logs: vec![
                    transfer_log(toks[0], from, router, amount),
                    transfer_log(toks[1], router, to, out_amount),
                    swap,
                ],
                internal_transfers: vec![],
            }
        } else {
            Transaction {
                chain,
                tx_hash: hash,
                block_number: 0,
                timestamp: t,
                from_addr: from,
                to_addr: Some(to),
                value: Amount::from_u128(amount),
                input_data: HexBytes(Vec::new()),
                status: TxStatus::Failed,
                logs: vec![],
                internal_transfers: vec![],
            }
        };
        builder.push_tx(tx);
    }

    finalize(builder, config.seed ^ 0x5117_5eed)
}

/// Assigns block numbers, builds the store, and stratifies splits by
/// per-transaction event-log count in a 7:1.5:1.5 ratio.
fn finalize(builder: WorldBuilder, split_seed: u64) -> Result<LabeledDataset, SimError> {
    let WorldBuilder { chains, mut txs, pairs, abis, annotations, .. } = builder;
    for tx in &mut txs {
        tx.block_number = (tx.timestamp.saturating_sub(WORLD_EPOCH)) / block_time(tx.chain) + 1;
    }

    // Stratified split assignment, deterministic in split_seed.
    let mut strata: BTreeMap<usize, Vec<(ChainId, TxHash)>> = BTreeMap::new();
    let mut keys: Vec<(ChainId, TxHash, usize)> =
        txs.iter().map(|t| (t.chain, t.tx_hash, t.logs.len())).collect();
    keys.sort();
    for (chain, hash, n_logs) in keys {
        strata.entry(n_logs).or_default().push((chain, hash));
    }
    let mut split_rng = ChaCha20Rng::seed_from_u64(split_seed);
    let mut splits = BTreeMap::new();
    for stratum in strata.values_mut() {
        for i in (1..stratum.len()).rev() {
            let j = split_rng.random_range(0..=i);
            stratum.swap(i, j);
        }
        let n = stratum.len();
        let fractions = [0.70f64, 0.15, 0.15];
        let mut counts: Vec<usize> = fractions.iter().map(|f| (f * n as f64) as usize).collect();
        let mut leftover = n - counts.iter().sum::<usize>();
        let mut order: Vec<usize> = (0..3).collect();
        order.sort_by(|&a, &b| {
            let ra = fractions[a] * n as f64 - counts[a] as f64;
            let rb = fractions[b] * n as f64 - counts[b] as f64;
            rb.partial_cmp(&ra).unwrap().then(a.cmp(&b))
        });
        for &slot in &order {
            if leftover == 0 {
                break;
            }
            counts[slot] += 1;
            leftover -= 1;
        }
        let mut cursor = 0;
        for (split, count) in [Split::Train, Split::Valid, Split::Test].iter().zip(&counts) {
            for key in &stratum[cursor..cursor + count] {
                splits.insert(*key, *split);
            }
            cursor += count;
        }
    }

    let store = crate::ledger::TxStore::build(chains, txs, abis)?;
    let ds = LabeledDataset { store, pairs, ner_annotations: annotations, splits };
    ds.validate().map_err(SimError::Ledger)?;
    Ok(ds)
}

/// Injects attack pairs into a benign-complete dataset by cloning existing
/// pairs' machinery with fresh identities and violated amounts. Returns the
/// dataset unchanged when every template count is zero.
pub fn inject_attacks(
    dataset: LabeledDataset,
    templates: &[AttackTemplate],
    seed: u64,
) -> Result<LabeledDataset, SimError> {
    if templates.iter().all(|t| t.count == 0) {
        return Ok(dataset);
    }
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let benign: Vec<PairLabel> =
        dataset.pairs.iter().filter(|p| !p.is_attack).cloned().collect();
    if benign.is_empty() {
        return Err(SimError::Config("dataset has no benign pairs to clone".into()));
    }

    let mut txs: Vec<Transaction> = dataset.store.transactions().cloned().collect();
    txs.sort_by_key(|t| (t.chain, t.key()));
    let mut used: BTreeSet<B256> = txs.iter().map(|t| t.tx_hash).collect();
    let mut pairs = dataset.pairs.clone();
    let chains: Vec<ChainId> = dataset.store.chains().collect();
    let t_min = txs.iter().map(|t| t.timestamp).min().unwrap_or(WORLD_EPOCH);
    let t_max = txs.iter().map(|t| t.timestamp).max().unwrap_or(WORLD_EPOCH + 86_400);

    let mut clone_idx = 0usize;
    for template in templates {
        for _ in 0..template.count {
            let source = &benign[clone_idx % benign.len()];
            clone_idx += 1;
            let dep = dataset
                .store
                .get(source.src_chain, source.src_tx)
                .ok_or_else(|| SimError::Config("pair deposit missing from store".into()))?
                .clone();
            let wd = dataset
                .store
                .get(source.dst_chain, source.dst_tx)
                .ok_or_else(|| SimError::Config("pair withdrawal missing from store".into()))?
                .clone();
            let (new_dep, new_wd) = clone_attack_pair(
                &mut rng,
                &mut used,
                dataset.store.abis(),
                &chains,
                &dep,
                &wd,
                template.kind,
                (t_min, t_max),
            )?;
            pairs.push(PairLabel {
                src_chain: new_dep.chain,
                src_tx: new_dep.tx_hash,
                dst_chain: new_wd.chain,
                dst_tx: new_wd.tx_hash,
                bridge: source.bridge.clone(),
                is_attack: true,
                attack_kind: Some(template.kind),
            });
            txs.push(new_dep);
            txs.push(new_wd);
        }
    }

    let abis = dataset.store.abis().clone();
    let builder = WorldBuilder {
        chains,
        txs,
        pairs,
        abis,
        annotations: dataset.ner_annotations.clone(),
        used_hashes: used,
    };
    finalize(builder, seed ^ 0x5117_5eed)
}

/// Rebuilds one (deposit, withdrawal) pair with fresh identity, timestamps,
/// cue values, and attack-kind amount violations. Cue fields are found
/// structurally: values the two original events share verbatim.
#[allow(clippy::too_many_arguments)]
fn clone_attack_pair(
    rng: &mut ChaCha20Rng,
    used: &mut BTreeSet<B256>,
    abis: &AbiRegistry,
    chains: &[ChainId],
    dep: &Transaction,
    wd: &Transaction,
    kind: AttackKind,
    time_range: (u64, u64),
) -> Result<(Transaction, Transaction), SimError> {
    let chain_ids: BTreeSet<u64> = chains.iter().map(|c| c.0).collect();
    let dep_amount = deposit_moved_amount(dep, abis);
    let wd_amount = withdrawal_paid_amount(wd, abis);

    // Fresh identity and timing.
    let new_user = rand_address(rng);
    let new_recv = rand_address(rng);
    let latency = wd.timestamp - dep.timestamp;
    let span = time_range.1.saturating_sub(time_range.0).max(3600);
    let new_t_dep = time_range.0 + rng.random_range(0..span);
    let new_t_wd = new_t_dep + latency.max(1);

    // Values shared between the two events are cue fields (or the pair's
    // own identity); remap them consistently.
    let dep_events = abis.decode_tx_with_decls(dep);
    let wd_events = abis.decode_tx_with_decls(wd);
    let mut remap: BTreeMap<String, TypedValue> = BTreeMap::new();
    let describe = |v: &TypedValue| format!("{v:?}");
    let wd_value_set: BTreeSet<String> = wd_events
        .iter()
        .flat_map(|(_, ev)| ev.pairs.iter().map(|p| describe(&p.value)))
        .collect();
    for (_, ev) in &dep_events {
        for pair in &ev.pairs {
            let key = describe(&pair.value);
            if !wd_value_set.contains(&key) || remap.contains_key(&key) {
                continue;
            }
            let replacement = match &pair.value {
                TypedValue::Numeric(a) => {
                    if a.to_u64().map(|v| chain_ids.contains(&v)).unwrap_or(false) {
                        continue; // chain id, keep
                    }
                    if *a == Amount::from_u128(dep_amount) || *a == Amount::from_u128(wd_amount) {
                        continue; // amounts handled by attack logic below
                    }
                    TypedValue::Numeric(Amount::from(rng.random::<u64>()))
                }
                TypedValue::Address(a) => {
                    if *a == dep.from_addr
                        || Some(*a) == dep.to_addr
                        || Some(*a) == wd.to_addr
                        || *a == wd.from_addr
                        || *a == Address::ZERO
                    {
                        continue; // infrastructure address, keep
                    }
                    TypedValue::Address(rand_address(rng))
                }
                TypedValue::Bytes(_) => {
                    let mut b = [0u8; 32];
                    rng.fill(&mut b);
                    TypedValue::Bytes(b.to_vec())
                }
                TypedValue::Text(_) | TypedValue::Bool(_) => continue,
            };
            remap.insert(key, replacement);
        }
    }

    let new_amount = log_uniform_amount(rng);
    let (dep_event_amount, moved, paid) = match kind {
        AttackKind::ZeroDeposit => (0u128, 0u128, new_amount),
        AttackKind::UnburnedWrap => (new_amount, 0, new_amount),
        AttackKind::InflatedWithdrawal => (new_amount, new_amount, new_amount.saturating_mul(5)),
    };

    let rewrite_value = |value: &TypedValue,
                         rng: &mut ChaCha20Rng,
                         original_amount: u128,
                         new_event_amount: u128|
     -> TypedValue {
        let key = describe(value);
        if let Some(replacement) = remap.get(&key) {
            return replacement.clone();
        }
        match value {
            TypedValue::Numeric(a) if *a == Amount::from_u128(original_amount) => {
                TypedValue::Numeric(Amount::from_u128(new_event_amount))
            }
            TypedValue::Address(a) if *a == dep.from_addr => TypedValue::Address(new_user),
            TypedValue::Numeric(_) => {
                // Unshared numeric filler: freshen so the clone is not a
                // near-duplicate of its template.
                let _ = rng;
                value.clone()
            }
            _ => value.clone(),
        }
    };

    // Rebuild deposit logs.
    let mut new_dep = dep.clone();
    new_dep.tx_hash = rand_hash(rng, used);
    new_dep.timestamp = new_t_dep;
    new_dep.from_addr = new_user;
    new_dep.value = if dep.value == Amount::from_u128(dep_amount) && dep_amount > 0 {
        Amount::from_u128(moved)
    } else {
        Amount::zero()
    };
    new_dep.internal_transfers.clear();
    let mut logs = Vec::new();
    for log in &dep.logs {
        let Some(decl) = abis.decl_for(log) else { continue };
        let decoded = crate::ledger::decode_event(log, decl)
            .map_err(|e| SimError::Config(format!("attack clone decode: {e}")))?;
        if is_token_transfer(decl) {
            // The lock/burn movement: dropped entirely for zero/unburned
            // kinds, rewritten for inflated.
            if moved == 0 {
                continue;
            }
            let to = match decoded.pairs[1].value {
                TypedValue::Address(a) => a,
                _ => Address::ZERO,
            };
            logs.push(transfer_log(log.emitter, new_user, to, moved));
            continue;
        }
        let values: Vec<TypedValue> = decoded
            .pairs
            .iter()
            .map(|p| rewrite_value(&p.value, rng, dep_amount, dep_event_amount))
            .collect();
        logs.push(
            encode_event(decl, log.emitter, &values)
                .map_err(|e| SimError::Config(format!("attack clone encode: {e}")))?,
        );
    }
    new_dep.logs = logs;

    let mut new_wd = wd.clone();
    new_wd.tx_hash = rand_hash(rng, used);
    new_wd.timestamp = new_t_wd;
    for transfer in &mut new_wd.internal_transfers {
        if transfer.to != Address::ZERO && Some(transfer.to) != wd.to_addr {
            transfer.to = new_recv;
        }
        transfer.amount = Amount::from_u128(paid);
    }
    let mut logs = Vec::new();
    for log in &wd.logs {
        let Some(decl) = abis.decl_for(log) else { continue };
        let decoded = crate::ledger::decode_event(log, decl)
            .map_err(|e| SimError::Config(format!("attack clone decode: {e}")))?;
        if is_token_transfer(decl) {
            let from = match decoded.pairs[0].value {
                TypedValue::Address(a) => a,
                _ => Address::ZERO,
            };
            logs.push(transfer_log(log.emitter, from, new_recv, paid));
            continue;
        }
        let values: Vec<TypedValue> = decoded
            .pairs
            .iter()
            .map(|p| rewrite_value(&p.value, rng, wd_amount, paid))
            .collect();
        logs.push(
            encode_event(decl, log.emitter, &values)
                .map_err(|e| SimError::Config(format!("attack clone encode: {e}")))?,
        );
    }
    new_wd.logs = logs;

    Ok((new_dep, new_wd))
}

/// Total value a deposit transaction actually moves toward the bridge
/// accounts (native value plus lock/burn transfers).
pub fn deposit_moved_amount(tx: &Transaction, abis: &AbiRegistry) -> u128 {
    let mut total: u128 = amount_u128(&tx.value);
    for t in &tx.internal_transfers {
        total = total.saturating_add(amount_u128(&t.amount));
    }
    for (decl, ev) in abis.decode_tx_with_decls(tx) {
        if is_token_transfer(decl) {
            if let TypedValue::Numeric(a) = &ev.pairs[2].value {
                total = total.saturating_add(amount_u128(a));
            }
        }
    }
    total
}

fn withdrawal_paid_amount(tx: &Transaction, abis: &AbiRegistry) -> u128 {
    let mut total: u128 = 0;
    for t in &tx.internal_transfers {
        total = total.saturating_add(amount_u128(&t.amount));
    }
    for (decl, ev) in abis.decode_tx_with_decls(tx) {
        if is_token_transfer(decl) {
            if let TypedValue::Numeric(a) = &ev.pairs[2].value {
                total = total.saturating_add(amount_u128(a));
            }
        }
    }
    total
}

fn amount_u128(a: &Amount) -> u128 {
    a.0.to_str_radix(10).parse::<u128>().unwrap_or(u128::MAX)
}
