//! Experiment plumbing: configs, dataset files, surrogate evaluation,
//! optimization runs and report tables.

mod config;
mod dataset;
mod eval;
mod optimize;
mod report;
mod uncertainty;

use thiserror::Error;

pub use config::{build_surrogate, build_tasks, ExperimentConfig, LocalMock, Suite, SurrogateSpec};
pub use dataset::{
    fit_rbfn_bank, generate_dataset, read_rbfn_bank, split_counts, write_rbfn_bank, Dataset, DatasetManifest,
    DatasetOptions, DatasetRecord, EncodeFailure, Split,
};
pub use eval::{comparison_markdown, evaluate_surrogate, EvalMetric, EvalReport, EvalRow};
pub use optimize::{read_runs, run_optimization, write_runs, RunRecord};
pub use report::{algorithm_runs, performance_table, sci, AlgorithmRuns, Cell, PerformanceTable};
pub use uncertainty::{uncertainty_study, CriterionRow, UncertaintyStudy, CRITERIA};

use crate::metrics::MetricsError;
use crate::optimizer::OptimizerError;
use crate::problems::ProblemError;
use crate::sne::CodecError;
use crate::surrogate::SurrogateError;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Parse { path: String, message: String },
    #[error(transparent)]
    Surrogate(#[from] SurrogateError),
    #[error(transparent)]
    Optimizer(#[from] OptimizerError),
    #[error(transparent)]
    Problem(#[from] ProblemError),
    #[error(transparent)]
    Codec(#[from] CodecError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error("surrogate returned no token probabilities for {0} queries")]
    MissingProbs(usize),
}

impl HarnessError {
    pub(crate) fn io(path: &std::path::Path, source: std::io::Error) -> Self {
        Self::Io {
            path: path.display().to_string(),
            source,
        }
    }

    pub(crate) fn parse(path: &std::path::Path, message: impl ToString) -> Self {
        Self::Parse {
            path: path.display().to_string(),
            message: message.to_string(),
        }
    }
}

pub(crate) fn write_file(path: &std::path::Path, contents: &str) -> Result<(), HarnessError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
    }
    std::fs::write(path, contents).map_err(|e| HarnessError::io(path, e))
}

pub(crate) fn read_file(path: &std::path::Path) -> Result<String, HarnessError> {
    std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))
}

/// Maps `f` over `items` on scoped threads, keeping input order.
pub(crate) fn par_map<T: Sync, R: Send>(items: &[T], f: impl Fn(usize, &T) -> R + Sync) -> Vec<R> {
    let workers = std::thread::available_parallelism()
        .map_or(1, |n| n.get())
        .min(items.len())
        .max(1);
    if workers == 1 {
        return items.iter().enumerate().map(|(i, t)| f(i, t)).collect();
    }
    let chunk = items.len().div_ceil(workers);
    std::thread::scope(|s| {
        let handles: Vec<_> = items
            .chunks(chunk)
            .enumerate()
            .map(|(c, part)| {
                let f = &f;
                s.spawn(move || {
                    part.iter()
                        .enumerate()
                        .map(|(i, t)| f(c * chunk + i, t))
                        .collect::<Vec<_>>()
                })
            })
            .collect();
        handles
            .into_iter()
            .flat_map(|h| h.join().expect("worker panicked"))
            .collect()
    })
}
