use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{read_file, write_file, HarnessError};
use crate::optimizer::{matde_run, MatdeConfig, MatdeOutcome};
use crate::problems::TaskSpec;
use crate::surrogate::Surrogate;

pub const RUNS_FILE: &str = "runs.json";
pub const RESULTS_FILE: &str = "results.csv";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub seed: u64,
    pub surrogate: String,
    pub outcome: MatdeOutcome,
}

fn trace_csv(outcome: &MatdeOutcome) -> String {
    let mut s = String::from("task,generation,best_pseudo_y,surrogate_calls\n");
    for r in &outcome.trace {
        s.push_str(&format!(
            "{},{},{},{}\n",
            r.task, r.generation, r.best_pseudo_y, r.surrogate_calls
        ));
    }
    s
}

fn results_csv(runs: &[RunRecord], tasks: &[TaskSpec]) -> String {
    let mut s = String::from(
        "seed,task,function_name,dim,best_pseudo_y,true_y_of_best,initial_best_pseudo_y,surrogate_calls,partial\n",
    );
    for run in runs {
        for r in &run.outcome.results {
            s.push_str(&format!(
                "{},{},{},{},{},{},{},{},{}\n",
                run.seed,
                r.task,
                r.name,
                tasks.get(r.task).map_or(0, TaskSpec::dim),
                r.best_pseudo_y,
                r.true_y_of_best,
                r.initial_best_pseudo_y,
                r.surrogate_calls,
                run.outcome.partial
            ));
        }
    }
    s
}

pub fn write_runs(runs: &[RunRecord], tasks: &[TaskSpec], dir: &Path) -> Result<(), HarnessError> {
    for run in runs {
        write_file(
            &dir.join("traces").join(format!("trace_seed{}.csv", run.seed)),
            &trace_csv(&run.outcome),
        )?;
    }
    write_file(&dir.join(RESULTS_FILE), &results_csv(runs, tasks))?;
    write_file(
        &dir.join(RUNS_FILE),
        &serde_json::to_string(runs).expect("runs serialize"),
    )
}

pub fn read_runs(dir: &Path) -> Result<Vec<RunRecord>, HarnessError> {
    let path = dir.join(RUNS_FILE);
    serde_json::from_str(&read_file(&path)?).map_err(|e| HarnessError::parse(&path, e))
}

/// One optimizer run per seed. With `out` set, traces and the aggregate
/// files are rewritten after every run, so a surrogate outage leaves the
/// finished runs and the partial one on disk. Runs stop at the first
/// partial outcome.
pub fn run_optimization(
    tasks: &[TaskSpec],
    surrogate: &dyn Surrogate,
    cfg: &MatdeConfig,
    seeds: &[u64],
    out: Option<&Path>,
) -> Result<Vec<RunRecord>, HarnessError> {
    let mut runs = Vec::with_capacity(seeds.len());
    for &seed in seeds {
        let outcome = matde_run(tasks, surrogate, &MatdeConfig { seed, ..cfg.clone() })?;
        let partial = outcome.partial;
        runs.push(RunRecord {
            seed,
            surrogate: surrogate.name(),
            outcome,
        });
        if let Some(dir) = out {
            write_runs(&runs, tasks, dir)?;
        }
        if partial {
            break;
        }
    }
    Ok(runs)
}
