//! Surrogate-assisted many-task optimization toolkit.
//!
//! Numerical types are generic over [`Scalar`] (`f32` or `f64`); the aliases
//! below fix them to `f64`.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod harness;
pub mod linalg;
pub mod metrics;
pub mod optimizer;
pub mod problems;
pub mod prompt;
pub mod scalar;
pub mod seed;
pub mod sne;
pub mod surrogate;
pub mod token;

pub use scalar::Scalar;

pub type Matrix64 = linalg::Matrix<f64>;
pub type BbobFunction64 = problems::BbobFunction<f64>;
pub type RbfnModel64 = surrogate::RbfnModel<f64>;
pub type StepDistribution64 = token::StepDistribution<f64>;
pub type Hypothesis64 = token::Hypothesis<f64>;
pub type UncertaintyReport64 = token::UncertaintyReport<f64>;
pub type TableSource64 = token::decode::TableSource<f64>;
