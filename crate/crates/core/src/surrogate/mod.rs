//! Fitness predictors consumed by the optimizer: an RBF network baseline,
//! oracle and constant references, the HTTP client and a mock token-level
//! server.

pub mod mock;
pub mod protocol;
pub mod rbfn;
pub mod remote;
pub mod simple;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::prompt::TaskMetadata;
use crate::token::UncertaintyReport;

pub use mock::{MockModel, MockServer, Noise};
pub use protocol::{DecodeSpec, PredictReply, PredictRequest, ProbEntry};
pub use rbfn::{rbfn_fit, RbfnConfig, RbfnModel};
pub use remote::{RemoteConfig, RemoteSurrogate};
pub use simple::{ExactSurrogate, MeanSurrogate, RbfnBank};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SurrogateError {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimMismatch { expected: usize, actual: usize },
    #[error("no model for task {0:?}")]
    UnknownTask(String),
    #[error("surrogate endpoint unavailable: {0}")]
    RemoteUnavailable(String),
    #[error("protocol error: {0}")]
    ProtocolError(String),
    #[error("server error {status}: {message}")]
    ServerError { status: u16, message: String },
    #[error("model output could not be parsed: {0}")]
    UnparseableOutput(String),
    #[error("need at least {need} training points, got {got}")]
    TooFewPoints { need: usize, got: usize },
    #[error("cannot bind {0}: address in use")]
    PortInUse(String),
    #[error("{0}")]
    Other(String),
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SurrogatePrediction {
    pub y: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub raw_text: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tokens: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub step_probs: Option<Vec<Vec<ProbEntry>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub uncertainty: Option<UncertaintyReport<f64>>,
}

impl SurrogatePrediction {
    pub fn value(y: f64) -> Self {
        Self { y, ..Self::default() }
    }
}

pub trait Surrogate: Send + Sync {
    fn predict(&self, meta: &TaskMetadata, x: &[f64]) -> Result<SurrogatePrediction, SurrogateError>;

    /// Predictions for many points of one task, in input order.
    fn predict_batch(&self, meta: &TaskMetadata, xs: &[Vec<f64>]) -> Result<Vec<SurrogatePrediction>, SurrogateError> {
        xs.iter().map(|x| self.predict(meta, x)).collect()
    }

    fn name(&self) -> String;
}

pub(crate) fn check_dim(meta: &TaskMetadata, x: &[f64]) -> Result<(), SurrogateError> {
    if x.len() != meta.dim {
        return Err(SurrogateError::DimMismatch {
            expected: meta.dim,
            actual: x.len(),
        });
    }
    Ok(())
}
