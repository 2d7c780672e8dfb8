//! Token vocabulary, per-step distributions, decoding, the weighted loss and
//! uncertainty scores.

pub mod decode;
pub mod dist;
pub mod pwce;
pub mod uncertainty;
pub mod vocab;

use thiserror::Error;

pub use decode::{
    beam_decode, greedy_decode, sample_decode, DistributionSource, FnSource, Hypothesis, SamplingStrategy, TableSource,
};
pub use dist::StepDistribution;
pub use pwce::{pwce_loss, pwce_weight, pwce_weights};
pub use uncertainty::{per_position_error_profile, uncertainty_scores, UncertaintyReport};
pub use vocab::{TokenId, Vocabulary};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TokenError {
    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),
    #[error("duplicate token {0:?}")]
    DuplicateToken(String),
    #[error("unknown token {0:?}")]
    UnknownToken(String),
    #[error("unknown token id {0}")]
    UnknownId(usize),
    #[error("vocabulary format: {0}")]
    Format(String),
    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },
    #[error("target at position {position} has zero probability")]
    ZeroProbabilityTarget { position: usize },
    #[error("top-two margin needs a vocabulary of at least two tokens")]
    NeedTwoTokensForMargin,
    #[error("malformed token {0:?}")]
    MalformedToken(String),
}
