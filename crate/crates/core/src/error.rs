use thiserror::Error;

use crate::providers::ProviderError;
use crate::task_tree::{NodeId, TaskStatus};

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("node {node} cannot move from {from:?} to {to:?}")]
    StateTransition { node: NodeId, from: TaskStatus, to: TaskStatus },

    #[error("internal error: {0}")]
    Internal(String),

    #[error("provider error: {0}")]
    Provider(#[from] ProviderError),

    #[error("could not parse verdict: {0}")]
    VerdictParse(String),

    #[error("unknown video: {0}")]
    UnknownVideo(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}
