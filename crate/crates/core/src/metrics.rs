//! Evaluation statistics: regression errors, transfer rates, standardized
//! scores, the Wilcoxon rank-sum test and rank correlations.

use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MetricsError {
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("need at least {need} values, got {got}")]
    TooFew { need: usize, got: usize },
    #[error("target range is zero")]
    DegenerateRange,
    #[error("variance is zero")]
    DegenerateVariance,
    #[error("baseline error is zero")]
    ZeroBaseline,
    #[error("pooled values on task {0} have zero spread or fewer than two entries")]
    DegeneratePool(usize),
    #[error("non-finite input")]
    NonFinite,
}

fn check_pair(a: &[f64], b: &[f64], need: usize) -> Result<(), MetricsError> {
    if a.len() != b.len() {
        return Err(MetricsError::LengthMismatch(a.len(), b.len()));
    }
    if a.len() < need {
        return Err(MetricsError::TooFew { need, got: a.len() });
    }
    if a.iter().chain(b).any(|v| !v.is_finite()) {
        return Err(MetricsError::NonFinite);
    }
    Ok(())
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Mean absolute error divided by the range of `y_true`.
pub fn smae(y_true: &[f64], y_pred: &[f64]) -> Result<f64, MetricsError> {
    check_pair(y_true, y_pred, 2)?;
    let max = y_true.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = y_true.iter().cloned().fold(f64::INFINITY, f64::min);
    let range = max - min;
    if range <= 0.0 {
        return Err(MetricsError::DegenerateRange);
    }
    let mae = y_true.iter().zip(y_pred).map(|(a, b)| (a - b).abs()).sum::<f64>() / y_true.len() as f64;
    Ok(mae / range)
}

/// Coefficient of determination, `1 - SS_res / SS_tot`.
pub fn r2(y_true: &[f64], y_pred: &[f64]) -> Result<f64, MetricsError> {
    check_pair(y_true, y_pred, 2)?;
    let m = mean(y_true);
    let ss_tot: f64 = y_true.iter().map(|y| (y - m).powi(2)).sum();
    if ss_tot <= 0.0 {
        return Err(MetricsError::DegenerateVariance);
    }
    let ss_res: f64 = y_true.iter().zip(y_pred).map(|(a, b)| (a - b).powi(2)).sum();
    Ok(1.0 - ss_res / ss_tot)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TaskErrorPair {
    pub err_single: f64,
    pub err_multi: f64,
}

/// Relative error reduction of the multi-task model over the single-task one.
pub fn tcr(p: TaskErrorPair) -> Result<f64, MetricsError> {
    if !(p.err_single.is_finite() && p.err_multi.is_finite()) {
        return Err(MetricsError::NonFinite);
    }
    if p.err_single == 0.0 {
        return Err(MetricsError::ZeroBaseline);
    }
    Ok((p.err_single - p.err_multi) / p.err_single)
}

/// Fractions of positive and non-positive transfer rates.
pub fn ptr_ntr(tcrs: &[f64]) -> Result<(f64, f64), MetricsError> {
    if tcrs.is_empty() {
        return Err(MetricsError::TooFew { need: 1, got: 0 });
    }
    let ptr = tcrs.iter().filter(|&&t| t > 0.0).count() as f64 / tcrs.len() as f64;
    Ok((ptr, 1.0 - ptr))
}

/// Mean standardized score of `focal`.
///
/// `finals[task][algorithm]` holds that algorithm's final values over runs.
/// Each task's values are pooled across all algorithms and runs; the focal
/// algorithm's mean is standardized with the pooled mean and population std.
pub fn mss(finals: &[Vec<Vec<f64>>], focal: usize) -> Result<f64, MetricsError> {
    if finals.is_empty() {
        return Err(MetricsError::TooFew { need: 1, got: 0 });
    }
    let mut total = 0.0;
    for (t, algs) in finals.iter().enumerate() {
        let pool: Vec<f64> = algs.iter().flatten().copied().collect();
        let own = algs
            .get(focal)
            .filter(|v| !v.is_empty())
            .ok_or(MetricsError::DegeneratePool(t))?;
        if pool.iter().any(|v| !v.is_finite()) {
            return Err(MetricsError::NonFinite);
        }
        if pool.len() < 2 {
            return Err(MetricsError::DegeneratePool(t));
        }
        let mu = mean(&pool);
        let sd = (pool.iter().map(|v| (v - mu).powi(2)).sum::<f64>() / pool.len() as f64).sqrt();
        if sd <= 0.0 {
            return Err(MetricsError::DegeneratePool(t));
        }
        total += (mean(own) - mu) / sd;
    }
    Ok(total / finals.len() as f64)
}

/// Average ranks (1-based, ties share the mean rank).
pub fn average_ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut ranks = vec![0.0; v.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    ranks
}

/// Mean rank of each method over rows of `table[row][method]`, lower values
/// ranking first. Rows containing non-finite entries are skipped.
pub fn mean_ranks(table: &[Vec<f64>]) -> Vec<f64> {
    let m = table.first().map_or(0, Vec::len);
    let mut sum = vec![0.0; m];
    let mut rows = 0;
    for row in table.iter().filter(|r| r.len() == m && r.iter().all(|v| v.is_finite())) {
        for (s, r) in sum.iter_mut().zip(average_ranks(row)) {
            *s += r;
        }
        rows += 1;
    }
    sum.iter()
        .map(|s| if rows > 0 { s / rows as f64 } else { f64::NAN })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    /// The first sample is significantly smaller (better when minimizing).
    #[serde(rename = "+")]
    Better,
    #[serde(rename = "≈")]
    Similar,
    #[serde(rename = "-")]
    Worse,
}

impl Verdict {
    pub fn symbol(self) -> &'static str {
        match self {
            Verdict::Better => "+",
            Verdict::Similar => "≈",
            Verdict::Worse => "-",
        }
    }
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.symbol())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WilcoxonResult {
    /// Mann-Whitney U of the first sample.
    pub u: f64,
    pub p: f64,
    pub exact: bool,
    pub verdict: Verdict,
}

/// Largest `n * m` handled by exact enumeration.
pub const EXACT_LIMIT: usize = 400;

/// Two-sided exact p-value by counting rank assignments: the number of
/// size-`n` subsets of the pooled (mid)ranks whose sum is at least as far
/// from its mean as the observed one, over `C(N, n)`.
pub fn rank_sum_exact_p(a: &[f64], b: &[f64]) -> f64 {
    if b.len() < a.len() {
        return rank_sum_exact_p(b, a);
    }
    let n = a.len();
    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let ranks = average_ranks(&pooled);
    // Doubled midranks are integers.
    let r2: Vec<usize> = ranks.iter().map(|r| (r * 2.0).round() as usize).collect();
    let observed: usize = r2[..n].iter().sum();
    let total: usize = r2.iter().sum();
    let nn = pooled.len();
    // dp[k][s]: number of k-subsets with doubled rank sum s, as f64 counts.
    let mut dp = vec![vec![0.0f64; total + 1]; n + 1];
    dp[0][0] = 1.0;
    for (i, &r) in r2.iter().enumerate() {
        let kmax = n.min(i + 1);
        for k in (1..=kmax).rev() {
            let (lo, hi) = dp.split_at_mut(k);
            let prev = &lo[k - 1];
            let cur = &mut hi[0];
            for s in (r..=total).rev() {
                if prev[s - r] != 0.0 {
                    cur[s] += prev[s - r];
                }
            }
        }
    }
    let all: f64 = dp[n].iter().sum();
    // The mean doubled sum is n (N + 1).
    let centre2 = n * (nn + 1);
    let dist = |s: usize| s.abs_diff(centre2);
    let d_obs = dist(observed);
    let extreme: f64 = dp[n]
        .iter()
        .enumerate()
        .filter(|&(s, &c)| c != 0.0 && dist(s) >= d_obs)
        .map(|(_, c)| c)
        .sum();
    (extreme / all).min(1.0)
}

/// Two-sided normal approximation with tie and continuity correction.
pub fn rank_sum_normal_p(a: &[f64], b: &[f64]) -> f64 {
    let (n, m) = (a.len() as f64, b.len() as f64);
    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let ranks = average_ranks(&pooled);
    let w: f64 = ranks[..a.len()].iter().sum();
    let u = w - n * (n + 1.0) / 2.0;
    let nn = n + m;
    let mut sorted = pooled.clone();
    sorted.sort_by(f64::total_cmp);
    let mut tie_term = 0.0;
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i;
        while j + 1 < sorted.len() && sorted[j + 1] == sorted[i] {
            j += 1;
        }
        let t = (j - i + 1) as f64;
        tie_term += t * t * t - t;
        i = j + 1;
    }
    let var = n * m / 12.0 * ((nn + 1.0) - tie_term / (nn * (nn - 1.0)));
    if var <= 0.0 {
        return 1.0;
    }
    let z = ((u - n * m / 2.0).abs() - 0.5).max(0.0) / var.sqrt();
    erfc(z / std::f64::consts::SQRT_2).min(1.0)
}

/// Two-sided Wilcoxon rank-sum (Mann-Whitney U) test of `a` against `b`.
/// Exact when `len(a) * len(b) <= 400`. The verdict is `Better` when `a` is
/// significantly smaller.
pub fn wilcoxon_rank_sum(a: &[f64], b: &[f64], alpha: f64) -> Result<WilcoxonResult, MetricsError> {
    for s in [a, b] {
        if s.len() < 3 {
            return Err(MetricsError::TooFew { need: 3, got: s.len() });
        }
        if s.iter().any(|v| v.is_nan()) {
            return Err(MetricsError::NonFinite);
        }
    }
    let n = a.len() as f64;
    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let w: f64 = average_ranks(&pooled)[..a.len()].iter().sum();
    let u = w - n * (n + 1.0) / 2.0;
    let exact = a.len() * b.len() <= EXACT_LIMIT;
    let p = if exact {
        rank_sum_exact_p(a, b)
    } else {
        rank_sum_normal_p(a, b)
    };
    let centre = n * b.len() as f64 / 2.0;
    let verdict = if p >= alpha || u == centre {
        Verdict::Similar
    } else if u < centre {
        Verdict::Better
    } else {
        Verdict::Worse
    };
    Ok(WilcoxonResult { u, p, exact, verdict })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Correlations {
    pub pearson: f64,
    pub spearman: f64,
    pub kendall: f64,
}

pub fn pearson(u: &[f64], e: &[f64]) -> Result<f64, MetricsError> {
    check_pair(u, e, 2)?;
    let (mu, me) = (mean(u), mean(e));
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (a, b) in u.iter().zip(e) {
        sxy += (a - mu) * (b - me);
        sxx += (a - mu).powi(2);
        syy += (b - me).powi(2);
    }
    if sxx <= 0.0 || syy <= 0.0 {
        return Err(MetricsError::DegenerateVariance);
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

pub fn spearman(u: &[f64], e: &[f64]) -> Result<f64, MetricsError> {
    check_pair(u, e, 2)?;
    pearson(&average_ranks(u), &average_ranks(e))
}

/// Counts inversions of `v` while merge-sorting it.
fn merge_count(v: &mut [f64], buf: &mut Vec<f64>) -> u64 {
    let n = v.len();
    if n < 2 {
        return 0;
    }
    let mid = n / 2;
    let mut swaps = merge_count(&mut v[..mid], buf) + merge_count(&mut v[mid..], buf);
    buf.clear();
    let (mut i, mut j) = (0, mid);
    while i < mid && j < n {
        if v[j] < v[i] {
            buf.push(v[j]);
            swaps += (mid - i) as u64;
            j += 1;
        } else {
            buf.push(v[i]);
            i += 1;
        }
    }
    buf.extend_from_slice(&v[i..mid]);
    buf.extend_from_slice(&v[j..n]);
    v.copy_from_slice(buf);
    swaps
}

/// Sum of `t (t - 1) / 2` over runs of equal values in sorted order.
fn tied_pairs<I: Iterator<Item = bool>>(same_as_prev: I) -> u64 {
    let mut total = 0;
    let mut run = 1u64;
    for same in same_as_prev {
        if same {
            run += 1;
        } else {
            total += run * (run - 1) / 2;
            run = 1;
        }
    }
    total + run * (run - 1) / 2
}

/// Kendall tau-b in O(n log n).
pub fn kendall_tau_b(u: &[f64], e: &[f64]) -> Result<f64, MetricsError> {
    check_pair(u, e, 2)?;
    let n = u.len();
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| u[a].total_cmp(&u[b]).then(e[a].total_cmp(&e[b])));
    let n0 = (n * (n - 1) / 2) as u64;
    let n1 = tied_pairs((1..n).map(|i| u[idx[i]] == u[idx[i - 1]]));
    let joint = tied_pairs((1..n).map(|i| u[idx[i]] == u[idx[i - 1]] && e[idx[i]] == e[idx[i - 1]]));
    let mut ys: Vec<f64> = idx.iter().map(|&i| e[i]).collect();
    let swaps = merge_count(&mut ys, &mut Vec::with_capacity(n));
    let n2 = tied_pairs((1..n).map(|i| ys[i] == ys[i - 1]));
    if n1 == n0 || n2 == n0 {
        return Err(MetricsError::DegenerateVariance);
    }
    // concordant - discordant = n0 - n1 - n2 + joint - 2 * swaps
    let num = n0 as f64 - n1 as f64 - n2 as f64 + joint as f64 - 2.0 * swaps as f64;
    let den = ((n0 - n1) as f64).sqrt() * ((n0 - n2) as f64).sqrt();
    Ok((num / den).clamp(-1.0, 1.0))
}

pub fn correlations(u: &[f64], e: &[f64]) -> Result<Correlations, MetricsError> {
    check_pair(u, e, 3)?;
    Ok(Correlations {
        pearson: pearson(u, e)?,
        spearman: spearman(u, e)?,
        kendall: kendall_tau_b(u, e)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() < 1e-12
    }

    #[test]
    fn hand_values() {
        assert!(close(smae(&[0.0, 10.0], &[1.0, 9.0]).unwrap(), 0.1));
        assert!(close(r2(&[1.0, 2.0, 3.0], &[1.0, 2.0, 4.0]).unwrap(), 0.5));
        assert_eq!(smae(&[1.0, 1.0], &[1.0, 2.0]), Err(MetricsError::DegenerateRange));
        let t = tcr(TaskErrorPair {
            err_single: 0.129,
            err_multi: 0.075,
        })
        .unwrap();
        assert!((t - 0.4186).abs() < 1e-4);
        assert_eq!(ptr_ntr(&[0.1, 0.2]).unwrap(), (1.0, 0.0));
    }

    #[test]
    fn ranks_with_ties() {
        assert_eq!(average_ranks(&[3.0, 1.0, 3.0, 2.0]), vec![3.5, 1.0, 3.5, 2.0]);
        assert_eq!(mean_ranks(&[vec![1.0, 2.0], vec![3.0, 0.0]]), vec![1.5, 1.5]);
    }

    #[test]
    fn wilcoxon_small_exact() {
        let r = wilcoxon_rank_sum(&[1.0, 2.0, 3.0], &[10.0, 11.0, 12.0], 0.05).unwrap();
        assert!(r.exact);
        assert!(close(r.p, 0.1));
        assert_eq!(r.verdict, Verdict::Similar);
        let a: Vec<f64> = (0..10).map(f64::from).collect();
        let b: Vec<f64> = (20..30).map(f64::from).collect();
        assert_eq!(wilcoxon_rank_sum(&a, &b, 0.05).unwrap().verdict, Verdict::Better);
        assert_eq!(wilcoxon_rank_sum(&b, &a, 0.05).unwrap().verdict, Verdict::Worse);
    }

    #[test]
    fn kendall_ties() {
        // Pairs counted by hand: C=3, D=1, ties in x: 1, ties in y: 1.
        let x = [1.0, 2.0, 2.0, 3.0];
        let y = [1.0, 3.0, 2.0, 2.0];
        let t = kendall_tau_b(&x, &y).unwrap();
        let expected = (3.0 - 1.0) / (5.0f64.sqrt() * 5.0f64.sqrt());
        assert!(close(t, expected), "{t} vs {expected}");
    }
}
