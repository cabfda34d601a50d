//! Per-bridge time-window calibration: recall of the true counterpart and
//! mean candidate-set size as functions of the window size, with the
//! plateau rule picking the operating point.

use serde::{Deserialize, Serialize};

use super::clues::{fetch_candidates, ground_truth_clue, Direction, ExplicitClues, TimeWindow};
use super::LocateError;
use crate::bridgesim::PairLabel;
use crate::ledger::TxStore;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeltaPoint {
    pub delta_s: u64,
    pub recall: f64,
    pub mean_candidates: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeltaReport {
    pub bridge: String,
    pub points: Vec<DeltaPoint>,
    /// Smallest grid value whose recall reaches 99% of the recall at the
    /// largest grid value.
    pub delta_star: u64,
}

/// Sweeps the window grid over a bridge's labeled pairs using label-derived
/// clues, so the curve isolates the temporal dimension from labeler errors.
pub fn calibrate_delta(
    bridge: &str,
    pairs: &[PairLabel],
    store: &TxStore,
    grid: &[u64],
) -> Result<DeltaReport, LocateError> {
    if grid.is_empty() {
        return Err(LocateError::Data("empty calibration grid".into()));
    }
    if grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(LocateError::Data("grid must be strictly increasing".into()));
    }
    let bridge_pairs: Vec<&PairLabel> =
        pairs.iter().filter(|p| p.bridge == bridge).collect();
    if bridge_pairs.is_empty() {
        return Err(LocateError::Data(format!("no pairs labeled for bridge {bridge:?}")));
    }

    let mut points = Vec::with_capacity(grid.len());
    for &delta_s in grid {
        let mut hits = 0usize;
        let mut total_candidates = 0usize;
        for pair in &bridge_pairs {
            let Some(dep) = store.get(pair.src_chain, pair.src_tx) else { continue };
            let Some(wd) = store.get(pair.dst_chain, pair.dst_tx) else { continue };
            let Some((chain, address)) = ground_truth_clue(dep, wd, store) else { continue };
            let clues = ExplicitClues {
                direction: Direction::Forward,
                counterpart_chain: chain,
                counterpart_address: address,
                window: TimeWindow { anchor: dep.timestamp, delta_s },
            };
            let candidates = fetch_candidates(&clues, store)?;
            total_candidates += candidates.len();
            if candidates.candidates.iter().any(|t| t.tx_hash == pair.dst_tx) {
                hits += 1;
            }
        }
        points.push(DeltaPoint {
            delta_s,
            recall: hits as f64 / bridge_pairs.len() as f64,
            mean_candidates: total_candidates as f64 / bridge_pairs.len() as f64,
        });
    }

    let max_recall = points.last().map(|p| p.recall).unwrap_or(0.0);
    let delta_star = points
        .iter()
        .find(|p| p.recall >= 0.99 * max_recall)
        .map(|p| p.delta_s)
        .unwrap_or(grid[0]);
    Ok(DeltaReport { bridge: bridge.to_string(), points, delta_star })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bridgesim::{default_config, generate};

    #[test]
    fn single_point_grid_returns_that_value() {
        let mut config = default_config(3);
        config.bridges.truncate(1);
        config.n_pairs_per_bridge = 4;
        config.noise_ratio = 0.0;
        config.attacks.clear();
        let ds = generate(&config).unwrap();
        let report =
            calibrate_delta(&config.bridges[0].name, &ds.pairs, &ds.store, &[3600]).unwrap();
        assert_eq!(report.delta_star, 3600);
        assert_eq!(report.points.len(), 1);
        assert!((report.points[0].recall - 1.0).abs() < 1e-12);
    }

    #[test]
    fn bad_grids_are_rejected() {
        let mut config = default_config(3);
        config.bridges.truncate(1);
        config.n_pairs_per_bridge = 2;
        config.noise_ratio = 0.0;
        config.attacks.clear();
        let ds = generate(&config).unwrap();
        let name = &config.bridges[0].name;
        assert!(calibrate_delta(name, &ds.pairs, &ds.store, &[]).is_err());
        assert!(calibrate_delta(name, &ds.pairs, &ds.store, &[10, 10]).is_err());
        assert!(calibrate_delta("nope", &ds.pairs, &ds.store, &[10, 20]).is_err());
    }
}
