//! Small-world end-to-end pipeline checks. The full-size thresholds live
//! in the acceptance suite; here a compact world exercises train, trace,
//! evaluate, flag, and export together.

use bridgetrace_core::bridgesim::{default_config, generate, AttackKind, AttackTemplate, Split};
use bridgetrace_core::identify::{train_identifier, IdentifyHyper, TxLabel};
use bridgetrace_core::locate::{token_accuracy, train_labeler, LocatorHyper, DEFAULT_DELTA_S};
use bridgetrace_core::associate::{train_associator, AssociatorHyper};
use bridgetrace_core::pipeline::{
    build_flow_graph, evaluate, flag_anomalies, trace, AnomalyFlag, EvalDirection, Models,
    TraceDirective, TraceOptions, TraceStatus,
};

fn small_world() -> bridgetrace_core::bridgesim::LabeledDataset {
    let mut config = default_config(2024);
    config.bridges.truncate(4);
    config.n_pairs_per_bridge = 40;
    config.noise_ratio = 2.0;
    config.attacks = vec![
        AttackTemplate { kind: AttackKind::ZeroDeposit, count: 2 },
        AttackTemplate { kind: AttackKind::UnburnedWrap, count: 2 },
        AttackTemplate { kind: AttackKind::InflatedWithdrawal, count: 2 },
    ];
    generate(&config).unwrap()
}

fn train_models(ds: &bridgetrace_core::bridgesim::LabeledDataset) -> Models {
    let identify = train_identifier(
        ds,
        IdentifyHyper { epochs: 40, patience: 8, ..IdentifyHyper::default() },
    )
    .unwrap();
    let locate = train_labeler(&ds.ner_annotations, LocatorHyper::default()).unwrap();
    let associate = train_associator(
        ds,
        DEFAULT_DELTA_S,
        AssociatorHyper::default(),
    )
    .unwrap();
    Models { identify, locate, associate }
}

#[test]
fn end_to_end_small_world() {
    let _ = env_logger::builder().is_test(true).try_init();
    let ds = small_world();
    let models = train_models(&ds);

    // Labeler should be strong even on this small annotation set.
    let acc = token_accuracy(&models.locate, &ds.ner_annotations).unwrap();
    println!("labeler token accuracy (all annotations): {acc:.4}");
    assert!(acc > 0.8, "labeler accuracy {acc}");

    // Tracing metrics on the test split.
    let opts = TraceOptions::default();
    let fwd = evaluate(&ds, &models, EvalDirection::Forward, Split::Test, &opts).unwrap();
    let bwd = evaluate(&ds, &models, EvalDirection::Backward, Split::Test, &opts).unwrap();
    let both = evaluate(&ds, &models, EvalDirection::Both, Split::Test, &opts).unwrap();
    println!(
        "small-world F1: forward {:.4} backward {:.4} both {:.4} (n = {} / {} / {})",
        fwd.f1, bwd.f1, both.f1, fwd.n_queries, bwd.n_queries, both.n_queries
    );
    // Pooled counts reconcile exactly.
    assert_eq!(both.n_queries, fwd.n_queries + bwd.n_queries);
    assert_eq!(both.true_positives, fwd.true_positives + bwd.true_positives);
    assert_eq!(both.emitted, fwd.emitted + bwd.emitted);
    assert!(fwd.f1 > 0.6, "forward f1 {}", fwd.f1);
    assert!(bwd.f1 > 0.6, "backward f1 {}", bwd.f1);

    // Noise gate: a plain transfer must come back not_cross_chain.
    let noise = ds
        .store
        .transactions()
        .find(|t| {
            t.logs.is_empty()
                && t.status == bridgetrace_core::ledger::TxStatus::Success
                && !ds.pairs.iter().any(|p| {
                    (p.src_chain, p.src_tx) == (t.chain, t.tx_hash)
                        || (p.dst_chain, p.dst_tx) == (t.chain, t.tx_hash)
                })
        })
        .unwrap();
    let (label, probs) = models.identify.classify_tx(noise, &ds.store).unwrap();
    assert!((probs.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    if label == TxLabel::NonCrossChain {
        let r = trace(
            &ds.store,
            &models,
            noise.chain,
            noise.tx_hash,
            TraceDirective::Auto,
            &opts,
        )
        .unwrap();
        assert_eq!(r.status, TraceStatus::NotCrossChain);
    }

    // Determinism: tracing the same deposit twice gives identical results.
    let pair = ds.pairs.iter().find(|p| !p.is_attack).unwrap();
    let r1 = trace(&ds.store, &models, pair.src_chain, pair.src_tx, TraceDirective::Auto, &opts)
        .unwrap();
    let r2 = trace(&ds.store, &models, pair.src_chain, pair.src_tx, TraceDirective::Auto, &opts)
        .unwrap();
    assert_eq!(serde_json::to_string(&r1).unwrap(), serde_json::to_string(&r2).unwrap());

    // Anomaly flags: zero on benign, at least one correct flag per attack.
    for pair in &ds.pairs {
        let report = flag_anomalies(
            &ds.store,
            (pair.src_chain, pair.src_tx),
            (pair.dst_chain, pair.dst_tx),
        )
        .unwrap();
        match pair.attack_kind {
            None => assert!(report.flags.is_empty(), "benign pair flagged: {report:?}"),
            Some(AttackKind::ZeroDeposit) | Some(AttackKind::UnburnedWrap) => {
                assert!(report.flags.contains(&AnomalyFlag::ZeroDeposit));
            }
            Some(AttackKind::InflatedWithdrawal) => {
                assert!(report.flags.contains(&AnomalyFlag::WithdrawalExceedsDeposit));
                assert!(report.fee_ratio < 0.0);
            }
        }
    }

    // Flow graph over a few matched pairs.
    let matched: Vec<_> = ds
        .pairs
        .iter()
        .filter(|p| !p.is_attack)
        .take(5)
        .map(|p| (p.src_chain, p.src_tx, p.dst_chain, p.dst_tx))
        .collect();
    let graph = build_flow_graph(&ds.store, &matched).unwrap();
    assert!(graph.edges.iter().any(|e| matches!(e.kind, bridgetrace_core::pipeline::EdgeKind::CrossChain)));
    for e in &graph.edges {
        assert!(e.amount_fraction > 0.0 && e.amount_fraction <= 1.0 + 1e-9);
        if matches!(e.kind, bridgetrace_core::pipeline::EdgeKind::CrossChain) {
            assert_ne!(graph.nodes[e.from].chain, graph.nodes[e.to].chain);
        }
    }
    for s in graph.outgoing_fraction_sums() {
        assert!(s <= 1.0 + 1e-9);
    }
    let dot = graph.to_dot();
    assert!(dot.contains("style=dashed"));
}

#[test]
fn single_pair_flow_graph_shape() {
    // One lock-mint pair: sender -> router on-chain, router => recipient
    // cross-chain dashed with fraction 1.0, three nodes in total.
    let mut config = default_config(9);
    config.bridges.truncate(1);
    config.bridges[0].fee_rate = 0.0;
    config.n_pairs_per_bridge = 1;
    config.noise_ratio = 0.0;
    config.attacks.clear();
    let ds = generate(&config).unwrap();
    let p = &ds.pairs[0];
    let graph =
        build_flow_graph(&ds.store, &[(p.src_chain, p.src_tx, p.dst_chain, p.dst_tx)]).unwrap();
    assert_eq!(graph.nodes.len(), 3);
    assert_eq!(graph.edges.len(), 2);
    let cross = graph
        .edges
        .iter()
        .find(|e| matches!(e.kind, bridgetrace_core::pipeline::EdgeKind::CrossChain))
        .unwrap();
    assert!((cross.amount_fraction - 1.0).abs() < 1e-9);
}
