//! Explicit-clue extraction: BiLSTM+CRF labeling of parameter-name
//! sequences, per-bridge time-window calibration, and candidate retrieval.

pub mod calibrate;
pub mod clues;
pub mod model;
pub mod tags;

pub use calibrate::{calibrate_delta, DeltaPoint, DeltaReport};
pub use clues::{
    extract_clues, extract_explicit_clues, fetch_candidates, fetch_candidates_address_only,
    ground_truth_clue, CandidateSet, ClueOutcome, Direction, ExplicitClues, LocateError,
    TimeWindow, DEFAULT_DELTA_S,
};
pub use model::{token_accuracy, train_labeler, LocatorHyper, LocatorModel};
pub use tags::{Role, Tag};
