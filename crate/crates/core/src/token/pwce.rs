//! Priority-aware weighted cross-entropy over a fitness target.
//!
//! Positions are 1-based over the bracket-stripped target: 1 is the sign, 2 the
//! exponent, 3 the leading mantissa digit. Those three carry weight `2α`; the
//! weight then falls linearly from `α` at position 4 towards 1 and never drops
//! below 1.

use super::{StepDistribution, TokenError, TokenId};
use crate::scalar::Scalar;

pub fn pwce_weight<T: Scalar>(position: usize, alpha: T, gamma: usize) -> T {
    assert!(position >= 1, "positions are 1-based");
    if position <= 3 {
        return T::of(2.0) * alpha;
    }
    if gamma <= 1 {
        // Only sign, exponent and one digit exist.
        return T::one();
    }
    let step = (alpha - T::one()) / T::of_usize(gamma - 1);
    T::one().max(alpha - T::of_usize(position - 4) * step)
}

/// All weights for a target of `2 + gamma` symbols.
pub fn pwce_weights<T: Scalar>(alpha: T, gamma: usize) -> Vec<T> {
    (1..=gamma + 2).map(|i| pwce_weight(i, alpha, gamma)).collect()
}

/// `-Σ w_i log p_i(target_i)` with explicit weights.
pub fn weighted_cross_entropy<T: Scalar>(
    dists: &[StepDistribution<T>],
    target_ids: &[TokenId],
    weights: &[T],
) -> Result<T, TokenError> {
    if dists.len() != target_ids.len() || dists.len() != weights.len() {
        return Err(TokenError::LengthMismatch {
            expected: weights.len(),
            actual: dists.len().min(target_ids.len()),
        });
    }
    let mut loss = T::zero();
    for (pos, ((d, &t), &w)) in dists.iter().zip(target_ids).zip(weights).enumerate() {
        let p = d.prob(t);
        if p <= T::zero() {
            return Err(TokenError::ZeroProbabilityTarget { position: pos + 1 });
        }
        loss -= w * p.ln();
    }
    Ok(loss)
}

pub fn pwce_loss<T: Scalar>(
    dists: &[StepDistribution<T>],
    target_ids: &[TokenId],
    alpha: T,
    gamma: usize,
) -> Result<T, TokenError> {
    let n = gamma + 2;
    if dists.len() != n || target_ids.len() != n {
        return Err(TokenError::LengthMismatch {
            expected: n,
            actual: if dists.len() != n {
                dists.len()
            } else {
                target_ids.len()
            },
        });
    }
    weighted_cross_entropy(dists, target_ids, &pwce_weights(alpha, gamma))
}

/// Plain sequence cross-entropy (all weights one).
pub fn cross_entropy<T: Scalar>(dists: &[StepDistribution<T>], target_ids: &[TokenId]) -> Result<T, TokenError> {
    weighted_cross_entropy(dists, target_ids, &vec![T::one(); dists.len()])
}
