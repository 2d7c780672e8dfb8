use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::scalar::Scalar;

/// Latin hypercube design of `n` points: along every axis each of the `n`
/// equal strata holds exactly one point, placed uniformly inside it.
pub fn lhs_sample<T: Scalar>(n: usize, lo: &[T], hi: &[T], seed: u64) -> Vec<Vec<T>> {
    assert_eq!(lo.len(), hi.len(), "bounds must have equal length");
    let dim = lo.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut points = vec![vec![T::zero(); dim]; n];
    let nf = n as f64;
    for j in 0..dim {
        let mut strata: Vec<usize> = (0..n).collect();
        strata.shuffle(&mut rng);
        let width = hi[j] - lo[j];
        for (p, &s) in points.iter_mut().zip(&strata) {
            let u = (s as f64 + rng.random::<f64>()) / nf;
            // keep the point inside the box under rounding
            p[j] = (lo[j] + T::of(u) * width).min(hi[j]).max(lo[j]);
        }
    }
    points
}

/// Stratum index of each point along axis `j`.
pub fn strata<T: Scalar>(points: &[Vec<T>], lo: T, hi: T, j: usize) -> Vec<usize> {
    let n = points.len();
    points
        .iter()
        .map(|p| {
            let u = ((p[j] - lo) / (hi - lo)).f64();
            ((u * n as f64).floor() as usize).min(n - 1)
        })
        .collect()
}
