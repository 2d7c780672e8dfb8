//! Token-level uncertainty scores of a decoded fitness value.

use serde::{Deserialize, Serialize};

use super::{StepDistribution, TokenError, TokenId};
use crate::scalar::Scalar;
use crate::sne::parse_exponent_token;

/// Higher means less certain for every score.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UncertaintyReport<T> {
    /// Mean negative log-probability of the chosen tokens.
    pub nll: T,
    /// One minus the mean top-1 probability.
    pub imsp: T,
    /// Mean per-step entropy (nats).
    pub ent: T,
    /// One minus the mean top-1/top-2 margin.
    pub itpm: T,
    /// Population std of the decoded values of the parseable top beams.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beam_std: Option<T>,
}

pub fn uncertainty_scores<T: Scalar>(
    dists: &[StepDistribution<T>],
    chosen: &[TokenId],
    beam_values: Option<&[T]>,
) -> Result<UncertaintyReport<T>, TokenError> {
    if dists.len() != chosen.len() || dists.is_empty() {
        return Err(TokenError::LengthMismatch {
            expected: chosen.len(),
            actual: dists.len(),
        });
    }
    if dists.iter().any(|d| d.len() < 2) {
        return Err(TokenError::NeedTwoTokensForMargin);
    }
    let n = T::of_usize(dists.len());
    let mut nll = T::zero();
    let mut top1 = T::zero();
    let mut margin = T::zero();
    let mut ent = T::zero();
    for (d, &c) in dists.iter().zip(chosen) {
        let p = d.prob(c);
        nll -= if p > T::zero() { p.ln() } else { T::neg_infinity() };
        let (a, b) = d.top_two();
        top1 += a;
        margin += a - b;
        ent += d.entropy();
    }
    Ok(UncertaintyReport {
        nll: nll / n,
        imsp: T::one() - top1 / n,
        ent: ent / n,
        itpm: T::one() - margin / n,
        beam_std: beam_values.and_then(population_std),
    })
}

/// `None` for fewer than two values.
pub fn population_std<T: Scalar>(values: &[T]) -> Option<T> {
    if values.len() < 2 {
        return None;
    }
    let n = T::of_usize(values.len());
    let mean = values.iter().copied().sum::<T>() / n;
    let var = values.iter().map(|&v| (v - mean) * (v - mean)).sum::<T>() / n;
    Some(var.sqrt())
}

/// Per-position error magnitudes of one aligned, bracket-stripped pair:
/// sign mismatch (0 or 1), absolute exponent difference, then absolute
/// difference of each mantissa digit.
pub fn position_errors<S: AsRef<str>, U: AsRef<str>>(predicted: &[S], truth: &[U]) -> Result<Vec<f64>, TokenError> {
    if predicted.len() != truth.len() {
        return Err(TokenError::LengthMismatch {
            expected: truth.len(),
            actual: predicted.len(),
        });
    }
    predicted
        .iter()
        .zip(truth)
        .enumerate()
        .map(|(i, (p, t))| {
            let (p, t) = (p.as_ref(), t.as_ref());
            match i {
                0 => Ok(if p == t { 0.0 } else { 1.0 }),
                1 => {
                    let kp = parse_exponent_token(p).map_err(|_| TokenError::MalformedToken(p.into()))?;
                    let kt = parse_exponent_token(t).map_err(|_| TokenError::MalformedToken(t.into()))?;
                    Ok((kp - kt).abs() as f64)
                }
                _ => Ok((digit(p)? - digit(t)?).abs()),
            }
        })
        .collect()
}

fn digit(tok: &str) -> Result<f64, TokenError> {
    match tok.as_bytes() {
        [b] if b.is_ascii_digit() => Ok((b - b'0') as f64),
        _ => Err(TokenError::MalformedToken(tok.to_string())),
    }
}

/// Batch mean of [`position_errors`]; all pairs must share one length.
pub fn per_position_error_profile<S: AsRef<str>>(pairs: &[(Vec<S>, Vec<S>)]) -> Result<Vec<f64>, TokenError> {
    let mut sum: Vec<f64> = Vec::new();
    for (pred, truth) in pairs {
        let e = position_errors(pred, truth)?;
        if sum.is_empty() {
            sum = vec![0.0; e.len()];
        } else if sum.len() != e.len() {
            return Err(TokenError::LengthMismatch {
                expected: sum.len(),
                actual: e.len(),
            });
        }
        for (a, b) in sum.iter_mut().zip(e) {
            *a += b;
        }
    }
    let n = pairs.len().max(1) as f64;
    Ok(sum.into_iter().map(|v| v / n).collect())
}
