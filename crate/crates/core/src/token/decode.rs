//! Decoding strategies over an abstract per-step distribution source.

use std::cmp::Ordering;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{StepDistribution, TokenId};
use crate::scalar::Scalar;

/// Next-token distribution given the tokens generated so far.
///
/// Implementations must be deterministic for a fixed underlying state. All
/// implementations in this crate are immutable and can be queried from
/// several threads.
pub trait DistributionSource<T: Scalar> {
    fn vocab_size(&self) -> usize;
    fn next_distribution(&self, prefix: &[TokenId]) -> StepDistribution<T>;
}

impl<T: Scalar, S: DistributionSource<T> + ?Sized> DistributionSource<T> for &S {
    fn vocab_size(&self) -> usize {
        (**self).vocab_size()
    }

    fn next_distribution(&self, prefix: &[TokenId]) -> StepDistribution<T> {
        (**self).next_distribution(prefix)
    }
}

/// Position-indexed distributions that ignore the prefix contents. Past the
/// last step the source emits the end token with certainty when one is set,
/// and repeats the final step otherwise.
#[derive(Debug, Clone)]
pub struct TableSource<T> {
    steps: Vec<StepDistribution<T>>,
    end_id: Option<TokenId>,
}

impl<T: Scalar> TableSource<T> {
    pub fn new(steps: Vec<StepDistribution<T>>, end_id: Option<TokenId>) -> Self {
        assert!(!steps.is_empty(), "a table source needs at least one step");
        let n = steps[0].len();
        assert!(steps.iter().all(|s| s.len() == n), "steps must share one vocabulary");
        Self { steps, end_id }
    }

    pub fn steps(&self) -> &[StepDistribution<T>] {
        &self.steps
    }
}

impl<T: Scalar> DistributionSource<T> for TableSource<T> {
    fn vocab_size(&self) -> usize {
        self.steps[0].len()
    }

    fn next_distribution(&self, prefix: &[TokenId]) -> StepDistribution<T> {
        match self.steps.get(prefix.len()) {
            Some(d) => d.clone(),
            None => match self.end_id {
                Some(end) => StepDistribution::one_hot(self.vocab_size(), end),
                None => self.steps[self.steps.len() - 1].clone(),
            },
        }
    }
}

/// Wraps a closure as a source.
pub struct FnSource<F> {
    vocab_size: usize,
    f: F,
}

impl<F> FnSource<F> {
    pub fn new(vocab_size: usize, f: F) -> Self {
        Self { vocab_size, f }
    }
}

impl<T: Scalar, F: Fn(&[TokenId]) -> StepDistribution<T>> DistributionSource<T> for FnSource<F> {
    fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    fn next_distribution(&self, prefix: &[TokenId]) -> StepDistribution<T> {
        (self.f)(prefix)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Hypothesis<T> {
    pub ids: Vec<TokenId>,
    pub log_prob: T,
}

fn rank_hypotheses<T: Scalar>(a: &Hypothesis<T>, b: &Hypothesis<T>) -> Ordering {
    b.log_prob
        .partial_cmp(&a.log_prob)
        .unwrap_or(Ordering::Equal)
        .then_with(|| a.ids.cmp(&b.ids))
}

/// Argmax at every step; stops after emitting `end_id` or at `max_len` tokens.
pub fn greedy_decode<T: Scalar, S: DistributionSource<T>>(
    src: &S,
    end_id: Option<TokenId>,
    max_len: usize,
) -> Vec<TokenId> {
    let mut ids = Vec::with_capacity(max_len);
    while ids.len() < max_len {
        let next = src.next_distribution(&ids).argmax();
        ids.push(next);
        if Some(next) == end_id {
            break;
        }
    }
    ids
}

fn greedy_hypothesis<T: Scalar, S: DistributionSource<T>>(
    src: &S,
    end_id: Option<TokenId>,
    max_len: usize,
) -> Hypothesis<T> {
    let mut h = Hypothesis {
        ids: Vec::with_capacity(max_len),
        log_prob: T::zero(),
    };
    while h.ids.len() < max_len {
        let dist = src.next_distribution(&h.ids);
        let next = dist.argmax();
        h.log_prob += dist.prob(next).ln();
        h.ids.push(next);
        if Some(next) == end_id {
            break;
        }
    }
    h
}

/// Beam search ranked by raw cumulative log-probability.
///
/// At each step the best `width` extensions of the live beams are kept; those
/// ending in `end_id` are set aside as finished. Returns up to `width`
/// hypotheses drawn from finished and still-live beams, best first. The
/// greedy sequence joins the final pool, since pruning can otherwise drop it
/// and return a worse top hypothesis.
pub fn beam_decode<T: Scalar, S: DistributionSource<T>>(
    src: &S,
    width: usize,
    end_id: Option<TokenId>,
    max_len: usize,
) -> Vec<Hypothesis<T>> {
    let width = width.max(1);
    let mut live = vec![Hypothesis {
        ids: Vec::new(),
        log_prob: T::zero(),
    }];
    let mut finished: Vec<Hypothesis<T>> = Vec::new();
    for _ in 0..max_len {
        let mut candidates = Vec::new();
        for h in &live {
            let dist = src.next_distribution(&h.ids);
            for (id, &p) in dist.probs().iter().enumerate() {
                if p <= T::zero() {
                    continue;
                }
                let mut ids = h.ids.clone();
                ids.push(id);
                candidates.push(Hypothesis {
                    ids,
                    log_prob: h.log_prob + p.ln(),
                });
            }
        }
        candidates.sort_by(rank_hypotheses);
        candidates.truncate(width);
        live.clear();
        for c in candidates {
            if end_id.is_some() && c.ids.last().copied() == end_id {
                finished.push(c);
            } else {
                live.push(c);
            }
        }
        if live.is_empty() {
            break;
        }
    }
    finished.extend(live);
    let greedy = greedy_hypothesis(src, end_id, max_len);
    if !greedy.ids.is_empty() && !finished.iter().any(|h| h.ids == greedy.ids) {
        finished.push(greedy);
    }
    finished.sort_by(rank_hypotheses);
    finished.truncate(width);
    finished
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplingStrategy<T> {
    TopK(usize),
    TopP(T),
    Temperature(T),
}

impl<T: Scalar> SamplingStrategy<T> {
    /// The distribution actually sampled from at one step.
    pub fn transform(&self, dist: &StepDistribution<T>) -> StepDistribution<T> {
        match *self {
            Self::TopK(k) => dist.top_k(k),
            Self::TopP(p) => dist.top_p(p),
            Self::Temperature(t) => dist.with_temperature(t),
        }
    }
}

/// Draws one token id from a distribution by inverting its CDF.
pub fn sample_from<T: Scalar, R: Rng + ?Sized>(dist: &StepDistribution<T>, rng: &mut R) -> TokenId {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let mut last_positive = dist.argmax();
    for (id, &p) in dist.probs().iter().enumerate() {
        let p = p.f64();
        if p <= 0.0 {
            continue;
        }
        last_positive = id;
        acc += p;
        if u < acc {
            return id;
        }
    }
    // u landed in the rounding slack above the accumulated mass
    last_positive
}

/// Seeded stochastic decoding; identical seeds give identical sequences.
pub fn sample_decode<T: Scalar, S: DistributionSource<T>>(
    src: &S,
    strategy: SamplingStrategy<T>,
    seed: u64,
    end_id: Option<TokenId>,
    max_len: usize,
) -> Vec<TokenId> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut ids = Vec::with_capacity(max_len);
    while ids.len() < max_len {
        let dist = strategy.transform(&src.next_distribution(&ids));
        let next = sample_from(&dist, &mut rng);
        ids.push(next);
        if Some(next) == end_id {
            break;
        }
    }
    ids
}

/// Source distributions along a fixed token path (teacher forcing).
pub fn trace<T: Scalar, S: DistributionSource<T>>(src: &S, ids: &[TokenId]) -> Vec<StepDistribution<T>> {
    (0..ids.len()).map(|i| src.next_distribution(&ids[..i])).collect()
}

/// Cumulative log-probability of a token path under the source.
pub fn sequence_log_prob<T: Scalar, S: DistributionSource<T>>(src: &S, ids: &[TokenId]) -> T {
    trace(src, ids).iter().zip(ids).map(|(d, &id)| d.prob(id).ln()).sum()
}
