//! Gaussian radial basis function network with k-means++ centres.

use std::cmp::Ordering;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::SurrogateError;
use crate::linalg::{lstsq, ridge_solve, LinalgError, Matrix};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RbfnConfig {
    /// `None` picks `min(n, max(10, n / 10))`.
    pub n_centers: Option<usize>,
    /// Nearest other centres averaged for each width.
    pub neighbors: usize,
    /// Ridge penalty on the output weights, relative to the number of rows.
    /// Zero solves plain least squares.
    pub ridge: f64,
    pub seed: u64,
    pub max_kmeans_iters: usize,
    /// Choose the centre count from [`CENTER_GRID`] by error on a held-out
    /// fifth. An explicit `n_centers` wins.
    pub validation_grid: bool,
}

impl Default for RbfnConfig {
    fn default() -> Self {
        Self {
            n_centers: None,
            neighbors: 2,
            ridge: 0.0,
            seed: 0,
            max_kmeans_iters: 50,
            validation_grid: false,
        }
    }
}

/// Centre counts tried by the validation grid, as fractions of the rows.
pub const CENTER_GRID: [f64; 3] = [0.05, 0.1, 0.2];

pub fn default_centers(n: usize) -> usize {
    n.min((n / 10).max(10)).max(1)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RbfnModel<T> {
    pub centers: Vec<Vec<T>>,
    pub widths: Vec<T>,
    /// One weight per centre, then the bias.
    pub weights: Vec<T>,
    pub dim: usize,
    /// Set when the least-squares design was singular and a small ridge was used.
    pub ridge_fallback: bool,
}

impl<T: Scalar> RbfnModel<T> {
    fn basis(&self, x: &[T]) -> impl Iterator<Item = T> + '_ {
        let x = x.to_vec();
        self.centers.iter().zip(&self.widths).map(move |(c, &w)| {
            let d2 = sq_dist(&x, c);
            (-d2 / (T::of(2.0) * w * w)).exp()
        })
    }

    pub fn predict(&self, x: &[T]) -> Result<T, SurrogateError> {
        if x.len() != self.dim {
            return Err(SurrogateError::DimMismatch {
                expected: self.dim,
                actual: x.len(),
            });
        }
        let bias = self.weights[self.weights.len() - 1];
        Ok(self.basis(x).zip(&self.weights).map(|(p, &w)| p * w).sum::<T>() + bias)
    }
}

fn sq_dist<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(&p, &q)| (p - q) * (p - q)).sum()
}

fn cmp_rows<T: Scalar>(a: &[T], b: &[T]) -> Ordering {
    for (x, y) in a.iter().zip(b) {
        match x.partial_cmp(y) {
            Some(Ordering::Equal) | None => continue,
            Some(o) => return o,
        }
    }
    Ordering::Equal
}

/// Seeded k-means++ seeding followed by Lloyd iterations. Returns the centres.
pub fn kmeans<T: Scalar>(points: &[Vec<T>], k: usize, seed: u64, max_iters: usize) -> Vec<Vec<T>> {
    let n = points.len();
    assert!(k >= 1 && k <= n, "need 1 <= k <= n");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut chosen = vec![rng.random_range(0..n)];
    let mut d2: Vec<f64> = points.iter().map(|p| sq_dist(p, &points[chosen[0]]).f64()).collect();
    while chosen.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let u = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut pick = None;
            for (i, &w) in d2.iter().enumerate() {
                acc += w;
                if w > 0.0 && u < acc {
                    pick = Some(i);
                    break;
                }
            }
            pick.unwrap_or_else(|| d2.iter().rposition(|&w| w > 0.0).expect("positive mass"))
        } else {
            // only duplicates left: take the first unused index
            (0..n).find(|i| !chosen.contains(i)).expect("k <= n")
        };
        chosen.push(next);
        for (i, p) in points.iter().enumerate() {
            d2[i] = d2[i].min(sq_dist(p, &points[next]).f64());
        }
    }
    let mut centers: Vec<Vec<T>> = chosen.iter().map(|&i| points[i].clone()).collect();
    let mut assign = vec![usize::MAX; n];
    for _ in 0..max_iters {
        let mut changed = false;
        for (i, p) in points.iter().enumerate() {
            let mut best = 0;
            let mut bd = sq_dist(p, &centers[0]);
            for (j, c) in centers.iter().enumerate().skip(1) {
                let d = sq_dist(p, c);
                if d < bd {
                    bd = d;
                    best = j;
                }
            }
            if assign[i] != best {
                assign[i] = best;
                changed = true;
            }
        }
        if !changed {
            break;
        }
        let dim = points[0].len();
        let mut sums = vec![vec![T::zero(); dim]; k];
        let mut counts = vec![0usize; k];
        for (p, &a) in points.iter().zip(&assign) {
            counts[a] += 1;
            for (s, &v) in sums[a].iter_mut().zip(p) {
                *s += v;
            }
        }
        for j in 0..k {
            if counts[j] > 0 {
                let c = T::of_usize(counts[j]);
                centers[j] = sums[j].iter().map(|&s| s / c).collect();
            }
        }
    }
    centers
}

fn widths<T: Scalar>(centers: &[Vec<T>], points: &[Vec<T>], neighbors: usize, floor: T) -> Vec<T> {
    let k = centers.len();
    if k == 1 {
        let rms = (points.iter().map(|p| sq_dist(p, &centers[0])).sum::<T>() / T::of_usize(points.len())).sqrt();
        return vec![rms.max(floor)];
    }
    let nu = neighbors.clamp(1, k - 1);
    centers
        .iter()
        .enumerate()
        .map(|(i, c)| {
            let mut d: Vec<T> = centers
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != i)
                .map(|(_, o)| sq_dist(c, o).sqrt())
                .collect();
            d.sort_by(|a, b| a.partial_cmp(b).unwrap_or(Ordering::Equal));
            (d[..nu].iter().copied().sum::<T>() / T::of_usize(nu)).max(floor)
        })
        .collect()
}

fn fit_with<T: Scalar>(xs: &[Vec<T>], ys: &[T], k: usize, cfg: &RbfnConfig) -> Result<RbfnModel<T>, SurrogateError> {
    let dim = xs[0].len();
    let mut diag2 = T::zero();
    for j in 0..dim {
        let lo = xs.iter().map(|p| p[j]).fold(T::infinity(), T::min);
        let hi = xs.iter().map(|p| p[j]).fold(T::neg_infinity(), T::max);
        diag2 += (hi - lo) * (hi - lo);
    }
    let diag = diag2.sqrt();
    let floor = T::of(1e-6) * if diag > T::zero() { diag } else { T::one() };
    let centers = kmeans(xs, k, cfg.seed, cfg.max_kmeans_iters);
    let widths = widths(&centers, xs, cfg.neighbors, floor);
    let mut model = RbfnModel {
        centers,
        widths,
        weights: Vec::new(),
        dim,
        ridge_fallback: false,
    };
    let mut design = Matrix::from_fn(xs.len(), k + 1, |_, _| T::one());
    for (r, x) in xs.iter().enumerate() {
        for (c, v) in model.basis(x).enumerate() {
            design[(r, c)] = v;
        }
    }
    if cfg.ridge > 0.0 {
        let lambda = T::of(cfg.ridge * xs.len() as f64);
        model.weights = ridge_solve(&design, ys, lambda).map_err(|e| SurrogateError::Other(e.to_string()))?;
        return Ok(model);
    }
    model.weights = match lstsq(&design, ys) {
        Ok(w) => w,
        Err(LinalgError::RankDeficient) => {
            model.ridge_fallback = true;
            let mut lambda = T::of(1e-8);
            loop {
                match ridge_solve(&design, ys, lambda) {
                    Ok(w) => break w,
                    Err(_) if lambda < T::one() => lambda *= T::of(10.0),
                    Err(e) => return Err(SurrogateError::Other(e.to_string())),
                }
            }
        }
        Err(e) => return Err(SurrogateError::Other(e.to_string())),
    };
    Ok(model)
}

/// Fits an RBF network. Rows are put in a canonical order first, so the
/// result does not depend on the order of the training set.
pub fn rbfn_fit<T: Scalar>(
    train_x: &[Vec<T>],
    train_y: &[T],
    cfg: &RbfnConfig,
) -> Result<RbfnModel<T>, SurrogateError> {
    let n = train_x.len();
    if n == 0 || train_y.len() != n {
        return Err(SurrogateError::TooFewPoints {
            need: 1,
            got: n.min(train_y.len()),
        });
    }
    let dim = train_x[0].len();
    if let Some(bad) = train_x.iter().find(|r| r.len() != dim) {
        return Err(SurrogateError::DimMismatch {
            expected: dim,
            actual: bad.len(),
        });
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        cmp_rows(&train_x[a], &train_x[b]).then(train_y[a].partial_cmp(&train_y[b]).unwrap_or(Ordering::Equal))
    });
    let xs: Vec<Vec<T>> = order.iter().map(|&i| train_x[i].clone()).collect();
    let ys: Vec<T> = order.iter().map(|&i| train_y[i]).collect();

    match cfg.n_centers {
        Some(k) if k > n => Err(SurrogateError::TooFewPoints { need: k, got: n }),
        Some(0) => Err(SurrogateError::Other("n_centers must be positive".into())),
        Some(k) => fit_with(&xs, &ys, k, cfg),
        None if cfg.validation_grid && n >= 10 => fit_with(&xs, &ys, select_centers(&xs, &ys, cfg)?, cfg),
        None => fit_with(&xs, &ys, default_centers(n), cfg),
    }
}

fn select_centers<T: Scalar>(xs: &[Vec<T>], ys: &[T], cfg: &RbfnConfig) -> Result<usize, SurrogateError> {
    use rand::seq::SliceRandom;
    let n = xs.len();
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(cfg.seed ^ 0xa11d));
    let n_val = (n / 5).max(1);
    let (val, train) = idx.split_at(n_val);
    let tx: Vec<Vec<T>> = train.iter().map(|&i| xs[i].clone()).collect();
    let ty: Vec<T> = train.iter().map(|&i| ys[i]).collect();
    let mut best = (f64::INFINITY, default_centers(n));
    for frac in CENTER_GRID {
        let k = ((frac * tx.len() as f64).round() as usize).clamp(1, tx.len());
        let m = fit_with(&tx, &ty, k, cfg)?;
        let mse: f64 = val
            .iter()
            .map(|&i| (m.predict(&xs[i]).map(|p| p.f64()).unwrap_or(f64::INFINITY) - ys[i].f64()).powi(2))
            .sum::<f64>()
            / val.len() as f64;
        if mse < best.0 {
            best = (mse, ((frac * n as f64).round() as usize).clamp(1, n));
        }
    }
    Ok(best.1)
}
