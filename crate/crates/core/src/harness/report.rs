use serde::{Deserialize, Serialize};

use super::{HarnessError, RunRecord};
use crate::metrics::{mean_ranks, mss, wilcoxon_rank_sum, Verdict};

/// Final true values of one algorithm, `finals[task][run]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlgorithmRuns {
    pub name: String,
    pub finals: Vec<Vec<f64>>,
}

pub fn algorithm_runs(name: &str, runs: &[RunRecord]) -> AlgorithmRuns {
    let nt = runs.iter().map(|r| r.outcome.results.len()).max().unwrap_or(0);
    let mut finals = vec![Vec::new(); nt];
    for run in runs {
        for r in &run.outcome.results {
            finals[r.task].push(r.true_y_of_best);
        }
    }
    AlgorithmRuns {
        name: name.to_string(),
        finals,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub mean: f64,
    pub std: f64,
    /// Focal algorithm against this one; `None` for the focal column or when
    /// either side has fewer than three runs.
    pub verdict: Option<Verdict>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerformanceTable {
    pub task_names: Vec<String>,
    pub algorithms: Vec<String>,
    pub focal: usize,
    pub cells: Vec<Vec<Cell>>,
    /// Column with the lowest mean per task.
    pub best: Vec<usize>,
    pub mean_ranks: Vec<f64>,
    pub mss: Vec<Option<f64>>,
    /// Counts of `+`, `≈`, `-` per algorithm.
    pub tallies: Vec<(usize, usize, usize)>,
}

/// Mantissa with two decimals and a signed two-digit exponent: `1.19E+03`.
pub fn sci(v: f64) -> String {
    if !v.is_finite() {
        return format!("{v}");
    }
    let s = format!("{v:.2E}");
    let (m, e) = s.split_once('E').expect("exponent present");
    let e: i32 = e.parse().expect("integer exponent");
    format!("{m}E{}{:02}", if e < 0 { '-' } else { '+' }, e.abs())
}

fn mean_std(v: &[f64]) -> (f64, f64) {
    if v.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let m = v.iter().sum::<f64>() / v.len() as f64;
    let var = if v.len() > 1 {
        v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64
    } else {
        0.0
    };
    (m, var.sqrt())
}

/// Mean ± std per task and algorithm, Wilcoxon verdicts of the focal
/// algorithm against each other column, average ranks and MSS.
pub fn performance_table(
    task_names: &[String],
    algs: &[AlgorithmRuns],
    focal: usize,
    alpha: f64,
) -> Result<PerformanceTable, HarnessError> {
    if focal >= algs.len() {
        return Err(HarnessError::Config(format!("focal index {focal} out of range")));
    }
    let nt = task_names.len();
    if let Some(a) = algs.iter().find(|a| a.finals.len() != nt) {
        return Err(HarnessError::Config(format!(
            "{} has results for {} tasks, expected {nt}",
            a.name,
            a.finals.len()
        )));
    }
    let mut cells = Vec::with_capacity(nt);
    let mut best = Vec::with_capacity(nt);
    let mut tallies = vec![(0, 0, 0); algs.len()];
    for t in 0..nt {
        let focal_runs = &algs[focal].finals[t];
        let row: Vec<Cell> = algs
            .iter()
            .enumerate()
            .map(|(k, a)| {
                let (mean, std) = mean_std(&a.finals[t]);
                let verdict = (k != focal)
                    .then(|| wilcoxon_rank_sum(focal_runs, &a.finals[t], alpha).ok())
                    .flatten()
                    .map(|w| w.verdict);
                if let Some(v) = verdict {
                    let tally = &mut tallies[k];
                    match v {
                        Verdict::Better => tally.0 += 1,
                        Verdict::Similar => tally.1 += 1,
                        Verdict::Worse => tally.2 += 1,
                    }
                }
                Cell { mean, std, verdict }
            })
            .collect();
        best.push(
            row.iter()
                .enumerate()
                .filter(|(_, c)| c.mean.is_finite())
                .min_by(|a, b| a.1.mean.total_cmp(&b.1.mean))
                .map_or(0, |b| b.0),
        );
        cells.push(row);
    }
    let means: Vec<Vec<f64>> = cells.iter().map(|r| r.iter().map(|c| c.mean).collect()).collect();
    let finals_by_task: Vec<Vec<Vec<f64>>> = (0..nt)
        .map(|t| algs.iter().map(|a| a.finals[t].clone()).collect())
        .collect();
    Ok(PerformanceTable {
        task_names: task_names.to_vec(),
        algorithms: algs.iter().map(|a| a.name.clone()).collect(),
        focal,
        best,
        mean_ranks: mean_ranks(&means),
        mss: (0..algs.len()).map(|k| mss(&finals_by_task, k).ok()).collect(),
        tallies,
        cells,
    })
}

impl PerformanceTable {
    pub fn to_markdown(&self) -> String {
        let mut s = format!("| Task | {} |\n", self.algorithms.join(" | "));
        s.push_str(&format!("|---|{}\n", "---|".repeat(self.algorithms.len())));
        for (t, row) in self.cells.iter().enumerate() {
            let cells: Vec<String> = row
                .iter()
                .enumerate()
                .map(|(k, c)| {
                    let mut v = format!("{}±{}", sci(c.mean), sci(c.std));
                    if let Some(verdict) = c.verdict {
                        v.push_str(&format!("({verdict})"));
                    }
                    if k == self.best[t] {
                        v = format!("**{v}**");
                    }
                    v
                })
                .collect();
            s.push_str(&format!("| {} | {} |\n", self.task_names[t], cells.join(" | ")));
        }
        let tallies: Vec<String> = self
            .tallies
            .iter()
            .enumerate()
            .map(|(k, (p, a, m))| {
                if k == self.focal {
                    "-".into()
                } else {
                    format!("{p}/{a}/{m}")
                }
            })
            .collect();
        s.push_str(&format!("| +/≈/- | {} |\n", tallies.join(" | ")));
        let ranks: Vec<String> = self.mean_ranks.iter().map(|r| format!("{r:.2}")).collect();
        s.push_str(&format!("| average rank | {} |\n", ranks.join(" | ")));
        let mss: Vec<String> = self
            .mss
            .iter()
            .map(|m| m.map_or("n/a".into(), |v| format!("{v:.3}")))
            .collect();
        s.push_str(&format!("| MSS | {} |\n", mss.join(" | ")));
        s
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("task,algorithm,mean,std,verdict,best\n");
        for (t, row) in self.cells.iter().enumerate() {
            for (k, c) in row.iter().enumerate() {
                s.push_str(&format!(
                    "{},{},{},{},{},{}\n",
                    self.task_names[t],
                    self.algorithms[k],
                    c.mean,
                    c.std,
                    c.verdict.map_or("", Verdict::symbol),
                    k == self.best[t]
                ));
            }
        }
        s
    }
}
