use serde::{Deserialize, Serialize};

use super::{par_map, Dataset, HarnessError, Split};
use crate::metrics::{mean_ranks, r2, smae};
use crate::surrogate::Surrogate;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRow {
    pub task_id: usize,
    pub function_id: String,
    pub function_name: String,
    pub dim: usize,
    pub n_test: usize,
    pub smae: Option<f64>,
    pub r2: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub surrogate: String,
    pub rows: Vec<EvalRow>,
    pub macro_smae: Option<f64>,
    pub macro_r2: Option<f64>,
}

fn macro_mean(vals: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let v: Vec<f64> = vals.flatten().collect();
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, |v| format!("{v}"))
}

/// Scores the surrogate on each task's test split. Failures are recorded on
/// the task's row.
pub fn evaluate_surrogate(ds: &Dataset, surrogate: &dyn Surrogate) -> Result<EvalReport, HarnessError> {
    let tasks = ds.tasks()?;
    let rows = par_map(&tasks, |t, task| {
        let (xs, ys) = ds.task_split(t, Split::Test);
        let mut row = EvalRow {
            task_id: t,
            function_id: task.metadata.function_id.clone(),
            function_name: task.metadata.function_name.clone(),
            dim: task.dim(),
            n_test: xs.len(),
            smae: None,
            r2: None,
            error: None,
        };
        match surrogate.predict_batch(&task.metadata, &xs) {
            Ok(preds) => {
                let yhat: Vec<f64> = preds.iter().map(|p| p.y).collect();
                let mut errs = Vec::new();
                match smae(&ys, &yhat) {
                    Ok(v) => row.smae = Some(v),
                    Err(e) => errs.push(format!("sMAE: {e}")),
                }
                match r2(&ys, &yhat) {
                    Ok(v) => row.r2 = Some(v),
                    Err(e) => errs.push(format!("R2: {e}")),
                }
                if !errs.is_empty() {
                    row.error = Some(errs.join("; "));
                }
            }
            Err(e) => row.error = Some(e.to_string()),
        }
        row
    });
    Ok(EvalReport {
        surrogate: surrogate.name(),
        macro_smae: macro_mean(rows.iter().map(|r| r.smae)),
        macro_r2: macro_mean(rows.iter().map(|r| r.r2)),
        rows,
    })
}

impl EvalReport {
    /// One row per task plus a final `macro` row.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("task_id,function_id,function_name,dim,n_test,smae,r2,error\n");
        for r in &self.rows {
            s.push_str(&format!(
                "{},{},{},{},{},{},{},{}\n",
                r.task_id,
                r.function_id,
                r.function_name,
                r.dim,
                r.n_test,
                opt(r.smae),
                opt(r.r2),
                r.error.as_deref().unwrap_or("").replace([',', '\n'], " ")
            ));
        }
        let n: usize = self.rows.iter().map(|r| r.n_test).sum();
        s.push_str(&format!(
            "macro,,,,{n},{},{},\n",
            opt(self.macro_smae),
            opt(self.macro_r2)
        ));
        s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EvalMetric {
    Smae,
    R2,
}

/// Side-by-side markdown of several reports over the same tasks: best per
/// row in bold, macro average and average rank in the last rows.
pub fn comparison_markdown(reports: &[EvalReport], metric: EvalMetric) -> String {
    let Some(first) = reports.first() else {
        return String::new();
    };
    let get = |r: &EvalRow| match metric {
        EvalMetric::Smae => r.smae,
        EvalMetric::R2 => r.r2,
    };
    // Ranks are computed on a "lower is better" scale.
    let key = |v: f64| if metric == EvalMetric::R2 { -v } else { v };
    let label = if metric == EvalMetric::Smae { "sMAE" } else { "R²" };
    let mut s = format!(
        "| Task | D | {} |\n",
        reports
            .iter()
            .map(|r| r.surrogate.as_str())
            .collect::<Vec<_>>()
            .join(" | ")
    );
    s.push_str(&format!("|---|---|{}\n", "---|".repeat(reports.len())));
    let mut table = Vec::new();
    for (i, row) in first.rows.iter().enumerate() {
        let vals: Vec<Option<f64>> = reports.iter().map(|r| r.rows.get(i).and_then(get)).collect();
        let best = vals
            .iter()
            .enumerate()
            .filter_map(|(k, v)| v.map(|v| (k, key(v))))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .map(|b| b.0);
        let cells: Vec<String> = vals
            .iter()
            .enumerate()
            .map(|(k, v)| match v {
                Some(v) if Some(k) == best => format!("**{v:.4}**"),
                Some(v) => format!("{v:.4}"),
                None => "n/a".into(),
            })
            .collect();
        s.push_str(&format!(
            "| {} | {} | {} |\n",
            row.function_name,
            row.dim,
            cells.join(" | ")
        ));
        table.push(vals.iter().map(|v| v.map_or(f64::NAN, key)).collect::<Vec<f64>>());
    }
    let macros: Vec<String> = reports
        .iter()
        .map(|r| {
            let m = match metric {
                EvalMetric::Smae => r.macro_smae,
                EvalMetric::R2 => r.macro_r2,
            };
            m.map_or("n/a".into(), |v| format!("{v:.4}"))
        })
        .collect();
    s.push_str(&format!("| macro {label} | | {} |\n", macros.join(" | ")));
    if reports.len() > 1 {
        let ranks: Vec<String> = mean_ranks(&table).iter().map(|r| format!("{r:.2}")).collect();
        s.push_str(&format!("| average rank | | {} |\n", ranks.join(" | ")));
    }
    s
}
