use std::collections::HashMap;

use super::rbfn::{rbfn_fit, RbfnConfig, RbfnModel};
use super::{check_dim, Surrogate, SurrogateError, SurrogatePrediction};
use crate::problems::TaskSpec;
use crate::prompt::TaskMetadata;

fn unknown(meta: &TaskMetadata) -> SurrogateError {
    SurrogateError::UnknownTask(format!(
        "{} ({}, dim {})",
        meta.function_name, meta.function_id, meta.dim
    ))
}

/// Evaluates the true objective; the reference a perfect surrogate would match.
#[derive(Debug, Clone, Default)]
pub struct ExactSurrogate {
    tasks: HashMap<TaskMetadata, TaskSpec>,
}

impl ExactSurrogate {
    pub fn new(tasks: &[TaskSpec]) -> Self {
        Self {
            tasks: tasks.iter().map(|t| (t.metadata.clone(), t.clone())).collect(),
        }
    }
}

impl Surrogate for ExactSurrogate {
    fn predict(&self, meta: &TaskMetadata, x: &[f64]) -> Result<SurrogatePrediction, SurrogateError> {
        check_dim(meta, x)?;
        let task = self.tasks.get(meta).ok_or_else(|| unknown(meta))?;
        task.evaluate(x)
            .map(SurrogatePrediction::value)
            .map_err(|e| SurrogateError::Other(e.to_string()))
    }

    fn name(&self) -> String {
        "exact".into()
    }
}

/// Predicts the training mean of each task regardless of `x`.
#[derive(Debug, Clone, Default)]
pub struct MeanSurrogate {
    means: HashMap<TaskMetadata, f64>,
}

impl MeanSurrogate {
    pub fn insert(&mut self, meta: TaskMetadata, ys: &[f64]) {
        let m = if ys.is_empty() {
            0.0
        } else {
            ys.iter().sum::<f64>() / ys.len() as f64
        };
        self.means.insert(meta, m);
    }
}

impl Surrogate for MeanSurrogate {
    fn predict(&self, meta: &TaskMetadata, x: &[f64]) -> Result<SurrogatePrediction, SurrogateError> {
        check_dim(meta, x)?;
        self.means
            .get(meta)
            .map(|&m| SurrogatePrediction::value(m))
            .ok_or_else(|| unknown(meta))
    }

    fn name(&self) -> String {
        "mean".into()
    }
}

/// One RBF network per task.
#[derive(Debug, Clone, Default)]
pub struct RbfnBank {
    models: HashMap<TaskMetadata, RbfnModel<f64>>,
}

impl RbfnBank {
    pub fn fit(
        &mut self,
        meta: TaskMetadata,
        xs: &[Vec<f64>],
        ys: &[f64],
        cfg: &RbfnConfig,
    ) -> Result<&RbfnModel<f64>, SurrogateError> {
        let model = rbfn_fit(xs, ys, cfg)?;
        if model.dim != meta.dim {
            return Err(SurrogateError::DimMismatch {
                expected: meta.dim,
                actual: model.dim,
            });
        }
        self.models.insert(meta.clone(), model);
        Ok(&self.models[&meta])
    }

    pub fn insert(&mut self, meta: TaskMetadata, model: RbfnModel<f64>) {
        self.models.insert(meta, model);
    }

    pub fn get(&self, meta: &TaskMetadata) -> Option<&RbfnModel<f64>> {
        self.models.get(meta)
    }

    pub fn len(&self) -> usize {
        self.models.len()
    }

    pub fn is_empty(&self) -> bool {
        self.models.is_empty()
    }

    /// Models sorted by task, for saving a fitted bank.
    pub fn entries(&self) -> Vec<(TaskMetadata, RbfnModel<f64>)> {
        let mut v: Vec<_> = self.models.iter().map(|(k, m)| (k.clone(), m.clone())).collect();
        v.sort_by(|a, b| {
            (&a.0.function_id, a.0.dim, &a.0.function_name).cmp(&(&b.0.function_id, b.0.dim, &b.0.function_name))
        });
        v
    }

    pub fn from_entries(entries: Vec<(TaskMetadata, RbfnModel<f64>)>) -> Self {
        Self {
            models: entries.into_iter().collect(),
        }
    }
}

impl Surrogate for RbfnBank {
    fn predict(&self, meta: &TaskMetadata, x: &[f64]) -> Result<SurrogatePrediction, SurrogateError> {
        check_dim(meta, x)?;
        let m = self.models.get(meta).ok_or_else(|| unknown(meta))?;
        m.predict(x).map(SurrogatePrediction::value)
    }

    fn name(&self) -> String {
        "rbfn".into()
    }
}
