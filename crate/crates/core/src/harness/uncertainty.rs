use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Dataset, HarnessError, Split};
use crate::metrics::{correlations, Correlations, MetricsError};
use crate::surrogate::protocol::uncertainty_from_step_probs;
use crate::surrogate::Surrogate;
use crate::surrogate::SurrogatePrediction;
use crate::token::{UncertaintyReport, Vocabulary};

pub const CRITERIA: [&str; 5] = ["U_NLL", "U_IMSP", "U_ENT", "U_ITPM", "sigma_Beam"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriterionRow {
    pub criterion: String,
    pub n: usize,
    /// Tasks whose coefficients enter the averages.
    pub tasks: usize,
    /// Per-task coefficients averaged over tasks.
    pub pearson: Option<f64>,
    pub spearman: Option<f64>,
    pub kendall: Option<f64>,
    /// One coefficient over all queries of all tasks.
    pub pooled: Option<Correlations>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UncertaintyStudy {
    pub surrogate: String,
    pub queries: usize,
    pub rows: Vec<CriterionRow>,
}

fn report_of(p: &SurrogatePrediction, vocab: &Vocabulary) -> Option<UncertaintyReport<f64>> {
    if let Some(u) = &p.uncertainty {
        return Some(*u);
    }
    match (&p.tokens, &p.step_probs) {
        (Some(t), Some(s)) => uncertainty_from_step_probs(t, s, vocab).ok(),
        _ => None,
    }
}

/// Correlates every uncertainty criterion with the absolute prediction
/// error over the test split. `max_queries` draws a seeded subset.
pub fn uncertainty_study(
    ds: &Dataset,
    surrogate: &dyn Surrogate,
    vocab: &Vocabulary,
    max_queries: Option<usize>,
    seed: u64,
) -> Result<UncertaintyStudy, HarnessError> {
    let tasks = ds.tasks()?;
    let mut picked: Vec<usize> = (0..ds.records.len())
        .filter(|&i| ds.records[i].split == Split::Test)
        .collect();
    if let Some(n) = max_queries.filter(|&n| n < picked.len()) {
        picked.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        picked.truncate(n);
        picked.sort_unstable();
    }

    let mut scores: Vec<Vec<Option<f64>>> = vec![Vec::new(); CRITERIA.len()];
    let mut errors = Vec::new();
    let mut owner = Vec::new();
    let mut missing = 0;
    for (t, task) in tasks.iter().enumerate() {
        let idx: Vec<usize> = picked.iter().copied().filter(|&i| ds.records[i].task_id == t).collect();
        if idx.is_empty() {
            continue;
        }
        let xs: Vec<Vec<f64>> = idx.iter().map(|&i| ds.records[i].x.clone()).collect();
        let preds = surrogate.predict_batch(&task.metadata, &xs)?;
        for (&i, p) in idx.iter().zip(&preds) {
            let Some(u) = report_of(p, vocab) else {
                missing += 1;
                continue;
            };
            errors.push((p.y - ds.records[i].y).abs());
            owner.push(t);
            for (k, v) in [Some(u.nll), Some(u.imsp), Some(u.ent), Some(u.itpm), u.beam_std]
                .into_iter()
                .enumerate()
            {
                scores[k].push(v);
            }
        }
    }
    if missing > 0 {
        return Err(HarnessError::MissingProbs(missing));
    }

    let rows = CRITERIA
        .iter()
        .zip(&scores)
        .map(|(name, col)| criterion_row(name, col, &errors, &owner, tasks.len()))
        .collect();
    Ok(UncertaintyStudy {
        surrogate: surrogate.name(),
        queries: errors.len(),
        rows,
    })
}

fn criterion_row(name: &str, col: &[Option<f64>], errors: &[f64], owner: &[usize], nt: usize) -> CriterionRow {
    let mut per_task: Vec<(Vec<f64>, Vec<f64>)> = vec![(Vec::new(), Vec::new()); nt];
    for ((u, &e), &t) in col.iter().zip(errors).zip(owner) {
        if let Some(u) = u.filter(|u| u.is_finite() && e.is_finite()) {
            per_task[t].0.push(u);
            per_task[t].1.push(e);
        }
    }
    let mut row = CriterionRow {
        criterion: name.to_string(),
        n: per_task.iter().map(|p| p.0.len()).sum(),
        tasks: 0,
        pearson: None,
        spearman: None,
        kendall: None,
        pooled: None,
        note: None,
    };
    let mut sums = [0.0; 3];
    let mut first_err = None;
    for (u, e) in &per_task {
        if u.is_empty() {
            continue;
        }
        match correlations(u, e) {
            Ok(c) => {
                row.tasks += 1;
                sums[0] += c.pearson;
                sums[1] += c.spearman;
                sums[2] += c.kendall;
            }
            Err(err) => {
                first_err.get_or_insert(err);
            }
        }
    }
    if row.tasks > 0 {
        let k = row.tasks as f64;
        row.pearson = Some(sums[0] / k);
        row.spearman = Some(sums[1] / k);
        row.kendall = Some(sums[2] / k);
    } else {
        row.note = Some(match first_err {
            Some(MetricsError::DegenerateVariance) | None => "undefined: zero variance".into(),
            Some(err) => format!("undefined: {err}"),
        });
    }
    let (u, e): (Vec<f64>, Vec<f64>) = per_task.into_iter().flat_map(|(u, e)| u.into_iter().zip(e)).unzip();
    row.pooled = correlations(&u, &e).ok();
    row
}

fn cell(v: Option<f64>) -> String {
    v.map_or("n/a".into(), |v| format!("{v:.3}"))
}

impl UncertaintyStudy {
    pub fn row(&self, criterion: &str) -> Option<&CriterionRow> {
        self.rows.iter().find(|r| r.criterion == criterion)
    }

    pub fn to_markdown(&self) -> String {
        let mut s = format!(
            "Correlation with absolute error over {} queries ({}), averaged over tasks; pooled Spearman in the last column.\n\n| Criterion | Pearson | Spearman | Kendall | Spearman (pooled) |\n|---|---|---|---|---|\n",
            self.queries, self.surrogate
        );
        for r in &self.rows {
            let note = r.note.as_deref().map(|n| format!(" ({n})")).unwrap_or_default();
            s.push_str(&format!(
                "| {}{note} | {} | {} | {} | {} |\n",
                r.criterion,
                cell(r.pearson),
                cell(r.spearman),
                cell(r.kendall),
                cell(r.pooled.map(|c| c.spearman))
            ));
        }
        s
    }

    pub fn to_csv(&self) -> String {
        let f = |v: Option<f64>| v.map_or(String::new(), |v| v.to_string());
        let mut s = String::from(
            "criterion,n,tasks,pearson,spearman,kendall,pooled_pearson,pooled_spearman,pooled_kendall,note\n",
        );
        for r in &self.rows {
            s.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{}\n",
                r.criterion,
                r.n,
                r.tasks,
                f(r.pearson),
                f(r.spearman),
                f(r.kendall),
                f(r.pooled.map(|c| c.pearson)),
                f(r.pooled.map(|c| c.spearman)),
                f(r.pooled.map(|c| c.kendall)),
                r.note.as_deref().unwrap_or("")
            ));
        }
        s
    }
}
