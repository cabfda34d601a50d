//! Tracing metrics over the labeled dataset: precision over emitted
//! matches, recall over labeled queries, accuracy over all queries.
//! Failed gates and empty candidate sets are non-emissions; they cost
//! recall, not precision.

use serde::{Deserialize, Serialize};

use super::trace::{trace, Models, PipelineError, TraceDirective, TraceOptions, TraceStatus};
use crate::bridgesim::{LabeledDataset, Split};
use crate::locate::Direction;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EvalDirection {
    Forward,
    Backward,
    Both,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Metrics {
    pub direction: String,
    pub precision: f64,
    pub recall: f64,
    pub accuracy: f64,
    pub f1: f64,
    pub n_queries: usize,
    #[serde(skip)]
    pub true_positives: usize,
    #[serde(skip)]
    pub emitted: usize,
}

fn metrics_from_counts(direction: &str, tp: usize, emitted: usize, n_queries: usize) -> Metrics {
    let precision = if emitted > 0 { tp as f64 / emitted as f64 } else { 0.0 };
    let recall = if n_queries > 0 { tp as f64 / n_queries as f64 } else { 0.0 };
    let accuracy = recall;
    let f1 = if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    };
    Metrics {
        direction: direction.to_string(),
        precision,
        recall,
        accuracy,
        f1,
        n_queries,
        true_positives: tp,
        emitted,
    }
}

fn run_direction(
    ds: &LabeledDataset,
    models: &Models,
    direction: Direction,
    split: Split,
    opts: &TraceOptions,
) -> Result<(usize, usize, usize), PipelineError> {
    let mut tp = 0usize;
    let mut emitted = 0usize;
    let mut n = 0usize;
    for pair in &ds.pairs {
        let (q_chain, q_hash, t_chain, t_hash, directive) = match direction {
            Direction::Forward => (
                pair.src_chain,
                pair.src_tx,
                pair.dst_chain,
                pair.dst_tx,
                TraceDirective::Forward,
            ),
            Direction::Backward => (
                pair.dst_chain,
                pair.dst_tx,
                pair.src_chain,
                pair.src_tx,
                TraceDirective::Backward,
            ),
        };
        if ds.split_of(q_chain, q_hash) != Some(split) {
            continue;
        }
        n += 1;
        let result = trace(&ds.store, models, q_chain, q_hash, directive, opts)?;
        if result.status == TraceStatus::Matched {
            emitted += 1;
            let m = result.matched.expect("matched status carries a pair");
            if m.chain == t_chain && m.tx_hash == t_hash {
                tp += 1;
            }
        }
    }
    Ok((tp, emitted, n))
}

/// Evaluates tracing on one split. `Both` pools the forward and backward
/// query sets (their disjoint union) into a single count.
pub fn evaluate(
    ds: &LabeledDataset,
    models: &Models,
    direction: EvalDirection,
    split: Split,
    opts: &TraceOptions,
) -> Result<Metrics, PipelineError> {
    if !ds.pairs.iter().any(|p| {
        ds.split_of(p.src_chain, p.src_tx) == Some(split)
            || ds.split_of(p.dst_chain, p.dst_tx) == Some(split)
    }) {
        return Err(PipelineError::Data(format!("no labeled queries in split {split:?}")));
    }
    match direction {
        EvalDirection::Forward => {
            let (tp, emitted, n) = run_direction(ds, models, Direction::Forward, split, opts)?;
            Ok(metrics_from_counts("forward", tp, emitted, n))
        }
        EvalDirection::Backward => {
            let (tp, emitted, n) = run_direction(ds, models, Direction::Backward, split, opts)?;
            Ok(metrics_from_counts("backward", tp, emitted, n))
        }
        EvalDirection::Both => {
            let (tp_f, e_f, n_f) = run_direction(ds, models, Direction::Forward, split, opts)?;
            let (tp_b, e_b, n_b) = run_direction(ds, models, Direction::Backward, split, opts)?;
            Ok(metrics_from_counts("both", tp_f + tp_b, e_f + e_b, n_f + n_b))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_counts_give_unit_metrics() {
        let m = metrics_from_counts("forward", 10, 10, 10);
        assert_eq!(m.precision, 1.0);
        assert_eq!(m.recall, 1.0);
        assert_eq!(m.accuracy, 1.0);
        assert_eq!(m.f1, 1.0);
    }

    #[test]
    fn non_emissions_hurt_recall_not_precision() {
        // 10 queries, 5 emitted, all 5 correct.
        let m = metrics_from_counts("forward", 5, 5, 10);
        assert_eq!(m.precision, 1.0);
        assert_eq!(m.recall, 0.5);
        assert!((m.f1 - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn zero_denominators_yield_zero() {
        let m = metrics_from_counts("backward", 0, 0, 10);
        assert_eq!(m.precision, 0.0);
        assert_eq!(m.f1, 0.0);
    }
}
