use serde::{Deserialize, Serialize};

use super::{TokenError, TokenId};
use crate::scalar::Scalar;

/// Probability vector over the vocabulary at one decoding step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepDistribution<T> {
    probs: Vec<T>,
}

pub(crate) fn normalization_tolerance<T: Scalar>(len: usize) -> T {
    T::of(1e-9).max(T::epsilon() * T::of_usize(len.max(1)) * T::of(4.0))
}

impl<T: Scalar> StepDistribution<T> {
    pub fn new(probs: Vec<T>) -> Result<Self, TokenError> {
        if probs.is_empty() {
            return Err(TokenError::InvalidDistribution("empty".into()));
        }
        if probs.iter().any(|p| !p.is_finite() || *p < T::zero()) {
            return Err(TokenError::InvalidDistribution(
                "negative or non-finite probability".into(),
            ));
        }
        let total: T = probs.iter().copied().sum();
        if (total - T::one()).abs() > normalization_tolerance::<T>(probs.len()) {
            return Err(TokenError::InvalidDistribution(format!("probabilities sum to {total}")));
        }
        Ok(Self { probs })
    }

    /// Normalizes nonnegative weights.
    pub fn from_weights(weights: Vec<T>) -> Result<Self, TokenError> {
        let total: T = weights.iter().copied().sum();
        if !(total > T::zero()) || !total.is_finite() {
            return Err(TokenError::InvalidDistribution(
                "weights must have a positive finite sum".into(),
            ));
        }
        Self::new(weights.into_iter().map(|w| w / total).collect())
    }

    pub fn uniform(n: usize) -> Self {
        Self {
            probs: vec![T::one() / T::of_usize(n); n],
        }
    }

    pub fn one_hot(n: usize, id: TokenId) -> Self {
        let mut probs = vec![T::zero(); n];
        probs[id] = T::one();
        Self { probs }
    }

    /// Softmax of raw scores.
    pub fn softmax(logits: &[T]) -> Result<Self, TokenError> {
        let max = logits.iter().copied().fold(T::neg_infinity(), T::max);
        Self::from_weights(logits.iter().map(|&l| (l - max).exp()).collect())
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn probs(&self) -> &[T] {
        &self.probs
    }

    pub fn prob(&self, id: TokenId) -> T {
        self.probs.get(id).copied().unwrap_or_else(T::zero)
    }

    /// Most probable token; ties go to the lowest id.
    pub fn argmax(&self) -> TokenId {
        let mut best = 0;
        for (i, &p) in self.probs.iter().enumerate().skip(1) {
            if p > self.probs[best] {
                best = i;
            }
        }
        best
    }

    /// Token ids ordered by descending probability, ties by ascending id.
    pub fn ranked(&self) -> Vec<TokenId> {
        let mut ids: Vec<TokenId> = (0..self.probs.len()).collect();
        ids.sort_by(|&a, &b| {
            self.probs[b]
                .partial_cmp(&self.probs[a])
                .expect("probabilities are finite")
                .then(a.cmp(&b))
        });
        ids
    }

    /// Largest and second largest probabilities.
    pub fn top_two(&self) -> (T, T) {
        let mut first = T::zero();
        let mut second = T::zero();
        for &p in &self.probs {
            if p > first {
                second = first;
                first = p;
            } else if p > second {
                second = p;
            }
        }
        (first, second)
    }

    /// Shannon entropy in nats.
    pub fn entropy(&self) -> T {
        -self
            .probs
            .iter()
            .filter(|&&p| p > T::zero())
            .map(|&p| p * p.ln())
            .sum::<T>()
    }

    /// Keeps the `k` most probable tokens and renormalizes.
    pub fn top_k(&self, k: usize) -> Self {
        let k = k.clamp(1, self.len());
        let mut weights = vec![T::zero(); self.len()];
        for id in self.ranked().into_iter().take(k) {
            weights[id] = self.probs[id];
        }
        Self::renormalized(weights, self.argmax())
    }

    /// Keeps the smallest high-probability prefix whose mass reaches `p`.
    pub fn top_p(&self, p: T) -> Self {
        if p >= T::one() {
            return self.clone();
        }
        let mut weights = vec![T::zero(); self.len()];
        let mut mass = T::zero();
        for id in self.ranked() {
            weights[id] = self.probs[id];
            mass += self.probs[id];
            if mass >= p {
                break;
            }
        }
        Self::renormalized(weights, self.argmax())
    }

    /// Tempered distribution `p^(1/t)`, the same as dividing logits by `t`.
    /// `t == 0` collapses to the argmax.
    pub fn with_temperature(&self, t: T) -> Self {
        if t <= T::zero() {
            return Self::one_hot(self.len(), self.argmax());
        }
        let (top, _) = self.top_two();
        let inv = T::one() / t;
        // Scale by the top probability first so p^(1/t) does not underflow to zero everywhere.
        let weights = self
            .probs
            .iter()
            .map(|&q| if q > T::zero() { (q / top).powf(inv) } else { T::zero() })
            .collect();
        Self::renormalized(weights, self.argmax())
    }

    fn renormalized(weights: Vec<T>, fallback: TokenId) -> Self {
        let n = weights.len();
        Self::from_weights(weights).unwrap_or_else(|_| Self::one_hot(n, fallback))
    }

    /// Sum of probabilities, for checking normalization after transforms.
    pub fn total(&self) -> T {
        self.probs.iter().copied().sum()
    }
}
