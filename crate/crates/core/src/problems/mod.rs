//! Benchmark objectives, many-task suites and sampling designs.

pub mod bbob;
pub mod lhs;
pub mod manipulator;
pub mod task;
pub mod transforms;

use thiserror::Error;

pub use bbob::{function_number, BbobFunction, BBOB_NAMES};
pub use lhs::lhs_sample;
pub use manipulator::{cvt_unit_square, manipulator_eval, ManipulatorParams, ParamRect};
pub use task::{
    eval_function, make_manipulator_tasks, make_mcf_suite, ManifestEntry, McfSuite, Objective, TaskSource, TaskSpec,
    DEFAULT_BOUND, MANIPULATOR_JOINTS, MCF_DIMS,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ProblemError {
    #[error("unknown function {0:?}")]
    UnknownFunction(String),
    #[error("unknown suite {0:?}")]
    UnknownSuite(String),
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimMismatch { expected: usize, actual: usize },
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
}
