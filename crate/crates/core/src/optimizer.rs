//! Many-task differential evolution driven entirely by a surrogate.
//!
//! Each task keeps a population, an archive and a row of transfer rewards.
//! Per generation a task either runs DE/rand/1/bin or, with probability
//! `im`, crosses its individuals with a peer population picked from a
//! probability table that mixes the rewards with population similarity.
//! Every offspring is scored by the surrogate; the true objective is used
//! once per task, on the final incumbent.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::problems::TaskSpec;
use crate::scalar::Scalar;
use crate::seed::mix;
use crate::surrogate::{Surrogate, SurrogateError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OptimizerError {
    #[error("invalid optimizer configuration: {0}")]
    InvalidConfig(String),
    #[error("no tasks to optimize")]
    NoTasks,
    #[error("surrogate failed before the first generation completed: {0}")]
    Surrogate(#[from] SurrogateError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MatdeConfig {
    /// Probability of a transfer generation.
    pub im: f64,
    /// Probability that an individual enters the archive after selection.
    pub a_up: f64,
    /// Reward shrink factor.
    pub shk: f64,
    pub pop_size: usize,
    /// Generations including the initial population.
    pub generations: usize,
    pub archive_capacity: usize,
    pub seed: u64,
    pub f_range: (f64, f64),
    pub cr_range: (f64, f64),
    /// Initial reward of every peer.
    pub reward_floor: f64,
}

impl Default for MatdeConfig {
    fn default() -> Self {
        Self {
            im: 0.3,
            a_up: 0.2,
            shk: 0.8,
            pop_size: 50,
            generations: 100,
            archive_capacity: 300,
            seed: 0,
            f_range: (0.1, 1.0),
            cr_range: (0.1, 0.9),
            reward_floor: 1e-3,
        }
    }
}

impl MatdeConfig {
    pub fn validate(&self) -> Result<(), OptimizerError> {
        let bad = |m: &str| Err(OptimizerError::InvalidConfig(m.to_string()));
        let unit = |v: f64| (0.0..=1.0).contains(&v);
        if !unit(self.im) || !unit(self.a_up) {
            return bad("im and a_up must lie in [0, 1]");
        }
        if !(self.shk > 0.0 && self.shk < 1.0) {
            return bad("shk must lie in (0, 1)");
        }
        if self.pop_size < 4 {
            return bad("pop_size must be at least 4");
        }
        if self.generations == 0 {
            return bad("generations must be at least 1");
        }
        if self.archive_capacity == 0 {
            return bad("archive_capacity must be positive");
        }
        let range_ok = |(a, b): (f64, f64)| a.is_finite() && b.is_finite() && a <= b && a >= 0.0;
        if !range_ok(self.f_range) || !range_ok(self.cr_range) || self.cr_range.1 > 1.0 {
            return bad("F and CR ranges must be ordered, non-negative, CR <= 1");
        }
        if !(self.reward_floor > 0.0 && self.reward_floor.is_finite()) {
            return bad("reward_floor must be positive");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Individual {
    pub x: Vec<f64>,
    /// Surrogate (pseudo) fitness.
    pub y: f64,
}

#[derive(Debug, Clone)]
pub struct TaskState {
    pub population: Vec<Individual>,
    pub archive: Vec<Individual>,
    pub reward_row: Vec<f64>,
    pub best: Individual,
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub task: usize,
    pub generation: usize,
    pub best_pseudo_y: f64,
    /// Cumulative calls for this task.
    pub surrogate_calls: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskResult {
    pub task: usize,
    pub name: String,
    pub best_x: Vec<f64>,
    pub best_pseudo_y: f64,
    pub true_y_of_best: f64,
    pub initial_best_pseudo_y: f64,
    pub surrogate_calls: usize,
    #[serde(default)]
    pub archive_len: usize,
    /// Archive insertions after initialisation.
    #[serde(default)]
    pub archive_inserts: usize,
    /// Final transfer rewards towards every task (own entry unused).
    #[serde(default)]
    pub reward_row: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatdeOutcome {
    pub results: Vec<TaskResult>,
    pub trace: Vec<TraceRow>,
    pub surrogate_calls: usize,
    pub generations_completed: usize,
    /// Set when the surrogate failed mid-run; results hold the incumbents so far.
    pub partial: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// Folds `v` back into `[lo, hi]` by mirror reflection at the bounds.
pub fn reflect<T: Scalar>(v: T, lo: T, hi: T) -> T {
    let w = hi - lo;
    if w <= T::zero() {
        return lo;
    }
    if v >= lo && v <= hi {
        return v;
    }
    let two_w = w + w;
    let mut t = (v - lo) % two_w;
    if t < T::zero() {
        t += two_w;
    }
    if t > w {
        t = two_w - t;
    }
    (lo + t).max(lo).min(hi)
}

fn uniform_in<R: Rng + ?Sized>(rng: &mut R, (a, b): (f64, f64)) -> f64 {
    a + (b - a) * rng.random::<f64>()
}

/// DE/rand/1/bin over the whole population.
///
/// Draw order per individual: F, CR, r1, r2, r3 (rejection sampling, all
/// distinct from each other and from the parent), j_rand, then one uniform
/// per gene. Mutant components outside the box are reflected back.
pub fn de_step<T: Scalar, R: Rng + ?Sized>(
    population: &[Vec<T>],
    f_range: (f64, f64),
    cr_range: (f64, f64),
    lo: &[T],
    hi: &[T],
    rng: &mut R,
) -> Vec<Vec<T>> {
    let n = population.len();
    assert!(n >= 4, "DE/rand/1 needs at least four individuals");
    let d = lo.len();
    let mut out = Vec::with_capacity(n);
    for (i, parent) in population.iter().enumerate() {
        let f = T::of(uniform_in(rng, f_range));
        let cr = uniform_in(rng, cr_range);
        let mut picks = [0usize; 3];
        for k in 0..3 {
            picks[k] = loop {
                let r = rng.random_range(0..n);
                if r != i && !picks[..k].contains(&r) {
                    break r;
                }
            };
        }
        let [r1, r2, r3] = picks.map(|r| &population[r]);
        let j_rand = rng.random_range(0..d);
        let child = (0..d)
            .map(|j| {
                let u: f64 = rng.random();
                if u < cr || j == j_rand {
                    reflect(r1[j] + f * (r2[j] - r3[j]), lo[j], hi[j])
                } else {
                    parent[j]
                }
            })
            .collect();
        out.push(child);
    }
    out
}

/// Per-coordinate mean and variance of a population mapped to the unit box.
fn gaussian_fit(state: &TaskState, dims: usize) -> (Vec<f64>, Vec<f64>) {
    let n = state.population.len() as f64;
    let mut mean = vec![0.0; dims];
    let mut var = vec![0.0; dims];
    for j in 0..dims {
        let w = (state.hi[j] - state.lo[j]).max(f64::MIN_POSITIVE);
        let vals: Vec<f64> = state.population.iter().map(|p| (p.x[j] - state.lo[j]) / w).collect();
        let m = vals.iter().sum::<f64>() / n;
        mean[j] = m;
        var[j] = (vals.iter().map(|v| (v - m).powi(2)).sum::<f64>() / n).max(1e-12);
    }
    (mean, var)
}

fn kl_diag(m1: &[f64], v1: &[f64], m2: &[f64], v2: &[f64]) -> f64 {
    m1.iter()
        .zip(v1)
        .zip(m2.iter().zip(v2))
        .map(|((a, va), (b, vb))| 0.5 * ((vb / va).ln() + (va + (a - b).powi(2)) / vb - 1.0))
        .sum()
}

/// Symmetrized KL divergence between diagonal Gaussian fits of two
/// populations over their shared leading coordinates.
pub fn population_divergence(a: &TaskState, b: &TaskState) -> f64 {
    let dims = a.lo.len().min(b.lo.len());
    let (ma, va) = gaussian_fit(a, dims);
    let (mb, vb) = gaussian_fit(b, dims);
    0.5 * (kl_diag(&ma, &va, &mb, &vb) + kl_diag(&mb, &vb, &ma, &va))
}

/// Transfer probabilities of `task` over all tasks (zero for itself):
/// reward times a softmax of negative divergence.
pub fn transfer_probabilities(task: usize, states: &[TaskState]) -> Vec<f64> {
    let n = states.len();
    let mut p = vec![0.0; n];
    if n < 2 {
        return p;
    }
    let neg_div: Vec<f64> = (0..n)
        .map(|j| {
            if j == task {
                f64::NEG_INFINITY
            } else {
                -population_divergence(&states[task], &states[j])
            }
        })
        .collect();
    let top = neg_div.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    for j in (0..n).filter(|&j| j != task) {
        let sim = if top.is_finite() { (neg_div[j] - top).exp() } else { 1.0 };
        p[j] = states[task].reward_row[j] * sim;
    }
    let total: f64 = p.iter().sum();
    if !(total > 0.0 && total.is_finite()) {
        for (j, v) in p.iter_mut().enumerate() {
            *v = if j == task { 0.0 } else { 1.0 / (n - 1) as f64 };
        }
    } else {
        p.iter_mut().for_each(|v| *v /= total);
    }
    p
}

/// Draws a peer task from [`transfer_probabilities`]; never returns `task`.
pub fn select_transfer_task<R: Rng + ?Sized>(task: usize, states: &[TaskState], rng: &mut R) -> usize {
    assert!(states.len() >= 2, "transfer needs at least two tasks");
    let p = transfer_probabilities(task, states);
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let mut last = if task == 0 { 1 } else { 0 };
    for (j, &pj) in p.iter().enumerate() {
        if j == task || pj <= 0.0 {
            continue;
        }
        last = j;
        acc += pj;
        if u < acc {
            return j;
        }
    }
    last
}

/// Crossover of every individual of `target` with a random individual of
/// `source` over their shared leading coordinates.
fn transfer_offspring<R: Rng + ?Sized>(
    target: &TaskState,
    source: &TaskState,
    cr_range: (f64, f64),
    rng: &mut R,
) -> Vec<Vec<f64>> {
    let shared = target.lo.len().min(source.lo.len());
    target
        .population
        .iter()
        .map(|ind| {
            let partner = &source.population[rng.random_range(0..source.population.len())].x;
            let cr = uniform_in(rng, cr_range);
            let j_rand = rng.random_range(0..shared);
            let mut child = ind.x.clone();
            for j in 0..shared {
                let u: f64 = rng.random();
                if u < cr || j == j_rand {
                    child[j] = reflect(partner[j], target.lo[j], target.hi[j]);
                }
            }
            child
        })
        .collect()
}

const REWARD_MIN: f64 = 1e-100;
const REWARD_MAX: f64 = 1e100;

fn evaluate(surrogate: &dyn Surrogate, task: &TaskSpec, xs: &[Vec<f64>]) -> Result<Vec<f64>, SurrogateError> {
    let preds = surrogate.predict_batch(&task.metadata, xs)?;
    if preds.len() != xs.len() {
        return Err(SurrogateError::ProtocolError(format!(
            "{} predictions for {} points",
            preds.len(),
            xs.len()
        )));
    }
    Ok(preds
        .into_iter()
        .map(|p| if p.y.is_nan() { f64::INFINITY } else { p.y })
        .collect())
}

fn true_value(task: &TaskSpec, x: &[f64]) -> f64 {
    task.evaluate(x).unwrap_or(f64::NAN)
}

/// Runs the optimizer over `tasks` for `cfg.generations` generations
/// (the initial population is generation 1). Surrogate calls total
/// `tasks * generations * pop_size` on a complete run.
pub fn matde_run(
    tasks: &[TaskSpec],
    surrogate: &dyn Surrogate,
    cfg: &MatdeConfig,
) -> Result<MatdeOutcome, OptimizerError> {
    cfg.validate()?;
    if tasks.is_empty() {
        return Err(OptimizerError::NoTasks);
    }
    let nt = tasks.len();
    let mut rngs: Vec<ChaCha8Rng> = (0..nt)
        .map(|t| ChaCha8Rng::seed_from_u64(mix(cfg.seed, t as u64)))
        .collect();
    let mut calls = vec![0usize; nt];
    let mut inserts = vec![0usize; nt];
    let mut trace = Vec::new();

    let mut states = Vec::with_capacity(nt);
    for (t, task) in tasks.iter().enumerate() {
        let rng = &mut rngs[t];
        let xs: Vec<Vec<f64>> = (0..cfg.pop_size)
            .map(|_| {
                task.lo
                    .iter()
                    .zip(&task.hi)
                    .map(|(&l, &h)| l + (h - l) * rng.random::<f64>())
                    .collect()
            })
            .collect();
        let ys = evaluate(surrogate, task, &xs)?;
        calls[t] += xs.len();
        let population: Vec<Individual> = xs.into_iter().zip(ys).map(|(x, y)| Individual { x, y }).collect();
        let best = population
            .iter()
            .min_by(|a, b| a.y.total_cmp(&b.y))
            .cloned()
            .expect("population is non-empty");
        let archive = population.iter().take(cfg.archive_capacity).cloned().collect();
        states.push(TaskState {
            population,
            archive,
            reward_row: vec![cfg.reward_floor; nt],
            best,
            lo: task.lo.clone(),
            hi: task.hi.clone(),
        });
        trace.push(TraceRow {
            task: t,
            generation: 1,
            best_pseudo_y: states[t].best.y,
            surrogate_calls: calls[t],
        });
    }
    let initial: Vec<f64> = states.iter().map(|s| s.best.y).collect();

    let mut failure = None;
    let mut completed = 1;
    'gens: for gen in 2..=cfg.generations {
        for t in 0..nt {
            let rng = &mut rngs[t];
            let transfer = if nt > 1 && rng.random::<f64>() < cfg.im {
                Some(select_transfer_task(t, &states, rng))
            } else {
                None
            };
            let offspring = match transfer {
                Some(src) => transfer_offspring(&states[t], &states[src], cfg.cr_range, rng),
                None => {
                    let xs: Vec<Vec<f64>> = states[t].population.iter().map(|p| p.x.clone()).collect();
                    de_step(&xs, cfg.f_range, cfg.cr_range, &states[t].lo, &states[t].hi, rng)
                }
            };
            let ys = match evaluate(surrogate, &tasks[t], &offspring) {
                Ok(ys) => ys,
                Err(e) => {
                    failure = Some(e.to_string());
                    break 'gens;
                }
            };
            calls[t] += offspring.len();

            let state = &mut states[t];
            let before = state.best.y;
            for (i, (x, y)) in offspring.into_iter().zip(ys).enumerate() {
                if y <= state.population[i].y {
                    state.population[i] = Individual { x, y };
                    if y < state.best.y {
                        state.best = state.population[i].clone();
                    }
                }
            }
            if let Some(src) = transfer {
                let r = &mut state.reward_row[src];
                *r = if state.best.y < before {
                    *r / cfg.shk
                } else {
                    *r * cfg.shk
                };
                *r = r.clamp(REWARD_MIN, REWARD_MAX);
            }
            for i in 0..state.population.len() {
                if rng.random::<f64>() < cfg.a_up {
                    let ind = state.population[i].clone();
                    inserts[t] += 1;
                    if state.archive.len() < cfg.archive_capacity {
                        state.archive.push(ind);
                    } else {
                        let k = rng.random_range(0..state.archive.len());
                        state.archive[k] = ind;
                    }
                }
            }
            trace.push(TraceRow {
                task: t,
                generation: gen,
                best_pseudo_y: state.best.y,
                surrogate_calls: calls[t],
            });
        }
        completed = gen;
    }

    let results = tasks
        .iter()
        .zip(&states)
        .enumerate()
        .map(|(t, (task, s))| TaskResult {
            task: t,
            name: task.metadata.function_name.clone(),
            best_x: s.best.x.clone(),
            best_pseudo_y: s.best.y,
            true_y_of_best: true_value(task, &s.best.x),
            initial_best_pseudo_y: initial[t],
            surrogate_calls: calls[t],
            archive_len: s.archive.len(),
            archive_inserts: inserts[t],
            reward_row: s.reward_row.clone(),
        })
        .collect();
    Ok(MatdeOutcome {
        results,
        trace,
        surrogate_calls: calls.iter().sum(),
        generations_completed: completed,
        partial: failure.is_some(),
        error: failure,
    })
}
