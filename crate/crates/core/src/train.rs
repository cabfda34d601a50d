//! Errors shared by the model trainers.

use thiserror::Error;

use crate::nn::NnError;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("data error: {0}")]
    Data(String),
    #[error(transparent)]
    Nn(#[from] NnError),
}
