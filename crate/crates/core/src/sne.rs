//! Scientific-notation encoding (SNE) of real scalars and vectors.
//!
//! A nonzero scalar `z` is written as a sign token, one exponent token
//! `<10^k>` with `10^k <= |z~| < 10^(k+1)`, and `gamma` mantissa digits with
//! the decimal point after the first digit omitted:
//!
//! ```text
//! -2.065349139  (gamma = 10)  ->  - <10^0> 2 0 6 5 3 4 9 1 3 9
//! ```
//!
//! Rounding is half-away-from-zero on the exact binary value of the input, so
//! the encoded value never differs from the input by more than half a unit in
//! the last retained place.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CodecError {
    #[error("value is not finite")]
    NonFinite,
    #[error("decimal exponent {exponent} outside representable range [{k_min}, {k_max}]")]
    ExponentOutOfRange { exponent: i32, k_min: i32, k_max: i32 },
    #[error("malformed token {0:?}")]
    MalformedToken(String),
    #[error("invalid codec configuration: {0}")]
    InvalidConfig(String),
    #[error("token budget exhausted: L_max={l_max}, L_m={l_m}, gamma={gamma} leaves no room for one variable")]
    BudgetExhausted { l_max: usize, l_m: usize, gamma: usize },
    #[error("component {index}: {source}")]
    AtIndex {
        index: usize,
        #[source]
        source: Box<CodecError>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CodecConfig {
    /// Number of significant mantissa digits.
    pub gamma: usize,
    pub k_min: i32,
    pub k_max: i32,
    /// Encode nonzero magnitudes below `10^k_min` as canonical zero instead of failing.
    #[serde(default)]
    pub clamp_underflow: bool,
}

impl Default for CodecConfig {
    fn default() -> Self {
        Self {
            gamma: 15,
            k_min: -20,
            k_max: 20,
            clamp_underflow: false,
        }
    }
}

impl CodecConfig {
    pub fn new(gamma: usize, k_min: i32, k_max: i32) -> Result<Self, CodecError> {
        let cfg = Self {
            gamma,
            k_min,
            k_max,
            clamp_underflow: false,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_gamma(gamma: usize) -> Result<Self, CodecError> {
        let cfg = Self {
            gamma,
            ..Self::default()
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn clamping(mut self, clamp: bool) -> Self {
        self.clamp_underflow = clamp;
        self
    }

    pub fn validate(&self) -> Result<(), CodecError> {
        if self.gamma == 0 {
            return Err(CodecError::InvalidConfig("gamma must be at least 1".into()));
        }
        if !(self.k_min <= 0 && 0 <= self.k_max) {
            return Err(CodecError::InvalidConfig(format!(
                "exponent range [{}, {}] must contain 0",
                self.k_min, self.k_max
            )));
        }
        Ok(())
    }
}

/// One scalar in SNE form.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct EncodedNumber {
    negative: bool,
    exponent: i32,
    mantissa: Vec<u8>,
}

impl EncodedNumber {
    pub fn zero(gamma: usize) -> Self {
        Self {
            negative: false,
            exponent: 0,
            mantissa: vec![0; gamma],
        }
    }

    /// Builds an encoded number from raw parts, checking the digit invariants.
    pub fn from_parts(negative: bool, exponent: i32, mantissa: Vec<u8>) -> Result<Self, CodecError> {
        if mantissa.is_empty() {
            return Err(CodecError::MalformedToken("empty mantissa".into()));
        }
        if let Some(d) = mantissa.iter().find(|&&d| d > 9) {
            return Err(CodecError::MalformedToken(d.to_string()));
        }
        let all_zero = mantissa.iter().all(|&d| d == 0);
        if all_zero {
            if negative || exponent != 0 {
                return Err(CodecError::MalformedToken(
                    "zero mantissa must use the canonical '+ <10^0>' prefix".into(),
                ));
            }
        } else if mantissa[0] == 0 {
            return Err(CodecError::MalformedToken("leading mantissa digit is 0".into()));
        }
        Ok(Self {
            negative,
            exponent,
            mantissa,
        })
    }

    pub fn is_negative(&self) -> bool {
        self.negative
    }

    pub fn exponent(&self) -> i32 {
        self.exponent
    }

    pub fn mantissa(&self) -> &[u8] {
        &self.mantissa
    }

    pub fn gamma(&self) -> usize {
        self.mantissa.len()
    }

    pub fn is_zero(&self) -> bool {
        self.mantissa.iter().all(|&d| d == 0)
    }

    pub fn sign_token(&self) -> &'static str {
        if self.negative {
            "-"
        } else {
            "+"
        }
    }

    /// The symbols of this number in order: sign, exponent, digits.
    pub fn tokens(&self) -> Vec<String> {
        let mut out = Vec::with_capacity(self.gamma() + 2);
        out.push(self.sign_token().to_string());
        out.push(exponent_token(self.exponent));
        out.extend(self.mantissa.iter().map(|d| d.to_string()));
        out
    }

    /// Checks the exponent against a configuration's vocabulary range.
    pub fn check_range(&self, cfg: &CodecConfig) -> Result<(), CodecError> {
        if self.exponent < cfg.k_min || self.exponent > cfg.k_max {
            return Err(CodecError::ExponentOutOfRange {
                exponent: self.exponent,
                k_min: cfg.k_min,
                k_max: cfg.k_max,
            });
        }
        Ok(())
    }

    pub fn decode<T: Scalar>(&self) -> T {
        decode_scalar(self)
    }

    /// Builds from already split symbols (sign, exponent, digits...).
    pub fn from_symbols<S: AsRef<str>>(symbols: &[S]) -> Result<Self, CodecError> {
        let mut it = symbols.iter().map(|s| s.as_ref());
        let negative = match it.next() {
            Some("+") => false,
            Some("-") => true,
            Some(other) => return Err(CodecError::MalformedToken(other.to_string())),
            None => return Err(CodecError::MalformedToken("missing sign".into())),
        };
        let exponent = match it.next() {
            Some(tok) => parse_exponent_token(tok)?,
            None => return Err(CodecError::MalformedToken("missing exponent token".into())),
        };
        let mantissa = it
            .map(|tok| {
                let mut chars = tok.chars();
                match (chars.next(), chars.next()) {
                    (Some(c), None) if c.is_ascii_digit() => Ok(c as u8 - b'0'),
                    _ => Err(CodecError::MalformedToken(tok.to_string())),
                }
            })
            .collect::<Result<Vec<_>, _>>()?;
        Self::from_parts(negative, exponent, mantissa)
    }
}

impl fmt::Display for EncodedNumber {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}", self.sign_token(), exponent_token(self.exponent))?;
        for d in &self.mantissa {
            write!(f, " {d}")?;
        }
        Ok(())
    }
}

impl FromStr for EncodedNumber {
    type Err = CodecError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let symbols = split_symbols(s)?;
        Self::from_symbols(&symbols)
    }
}

/// Spelling of the exponent vocabulary token for `k`, e.g. `<10^3>` or `<10^-2>`.
pub fn exponent_token(k: i32) -> String {
    format!("<10^{k}>")
}

pub fn parse_exponent_token(tok: &str) -> Result<i32, CodecError> {
    tok.strip_prefix("<10^")
        .and_then(|rest| rest.strip_suffix('>'))
        .and_then(|k| k.parse::<i32>().ok())
        .ok_or_else(|| CodecError::MalformedToken(tok.to_string()))
}

/// Splits SNE text into symbols. Whitespace is optional between symbols, so
/// `"[+ <10^3>1 7]"` and `"[ + <10^3> 1 7 ]"` produce the same symbols. Angle
/// bracket groups (`<10^k>`, `<s>`, `</s>`) are single symbols.
pub fn split_symbols(text: &str) -> Result<Vec<&str>, CodecError> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        match c {
            b' ' | b'\t' | b'\n' | b'\r' => i += 1,
            b'<' => {
                let end = text[i..]
                    .find('>')
                    .ok_or_else(|| CodecError::MalformedToken(text[i..].to_string()))?;
                out.push(&text[i..i + end + 1]);
                i += end + 1;
            }
            b'[' | b']' | b',' | b'+' | b'-' | b'0'..=b'9' => {
                out.push(&text[i..i + 1]);
                i += 1;
            }
            _ => {
                let end = text[i..].find(char::is_whitespace).map_or(text.len(), |e| i + e);
                return Err(CodecError::MalformedToken(text[i..end].to_string()));
            }
        }
    }
    Ok(out)
}

/// Rounds `v > 0` to `gamma` significant digits, half away from zero.
/// Returns the digits and the decimal exponent of the leading digit.
fn round_significant(v: f64, gamma: usize) -> (Vec<u8>, i32) {
    // Twenty guard digits decide every case except a possible exact tie,
    // which is confirmed against the full decimal expansion of the double.
    let (mut digits, mut exp) = decimal_digits(v, gamma + 20);
    let round_up = match digits[gamma] {
        d if d > 5 => true,
        d if d < 5 => false,
        _ => {
            if digits[gamma + 1..].iter().any(|&d| d != 0) {
                true
            } else {
                // An f64 has at most 767 significant decimal digits.
                let (exact, _) = decimal_digits(v, 780);
                exact[gamma] >= 5
            }
        }
    };
    digits.truncate(gamma);
    if round_up {
        let mut pos = gamma;
        loop {
            if pos == 0 {
                digits.insert(0, 1);
                digits.truncate(gamma);
                exp += 1;
                break;
            }
            pos -= 1;
            if digits[pos] == 9 {
                digits[pos] = 0;
            } else {
                digits[pos] += 1;
                break;
            }
        }
    }
    (digits, exp)
}

/// First `count` significant decimal digits of `v > 0` (correctly rounded at
/// the last one) together with the decimal exponent of the first digit.
fn decimal_digits(v: f64, count: usize) -> (Vec<u8>, i32) {
    let s = format!("{:.*e}", count - 1, v);
    let (mant, exp) = s.split_once('e').expect("exponent marker in {:e} output");
    let digits = mant.bytes().filter(u8::is_ascii_digit).map(|b| b - b'0').collect();
    (digits, exp.parse().expect("integer exponent in {:e} output"))
}

pub fn encode_scalar<T: Scalar>(z: T, cfg: &CodecConfig) -> Result<EncodedNumber, CodecError> {
    let v = z.f64();
    if !v.is_finite() {
        return Err(CodecError::NonFinite);
    }
    if v == 0.0 {
        return Ok(EncodedNumber::zero(cfg.gamma));
    }
    let (mantissa, exponent) = round_significant(v.abs(), cfg.gamma);
    if exponent < cfg.k_min && cfg.clamp_underflow {
        return Ok(EncodedNumber::zero(cfg.gamma));
    }
    let enc = EncodedNumber {
        negative: v < 0.0,
        exponent,
        mantissa,
    };
    enc.check_range(cfg)?;
    Ok(enc)
}

/// Nearest `T` to `s * d1.d2...dγ * 10^k`.
pub fn decode_scalar<T: Scalar>(e: &EncodedNumber) -> T {
    if e.is_zero() {
        return T::zero();
    }
    let mut s = String::with_capacity(e.gamma() + 8);
    if e.negative {
        s.push('-');
    }
    s.push((b'0' + e.mantissa[0]) as char);
    if e.gamma() > 1 {
        s.push('.');
        s.extend(e.mantissa[1..].iter().map(|&d| (b'0' + d) as char));
    }
    s.push('e');
    s.push_str(&e.exponent.to_string());
    s.parse::<T>()
        .unwrap_or_else(|_| unreachable!("decimal literal {s} always parses"))
}

/// Bracketed, comma separated SNE array, e.g. `[+ <10^0> 1 0 0, - <10^0> 1 0 0]`.
pub fn encode_vector<T: Scalar>(xs: &[T], cfg: &CodecConfig) -> Result<String, CodecError> {
    let parts = xs
        .iter()
        .enumerate()
        .map(|(index, &x)| {
            encode_scalar(x, cfg)
                .map(|e| e.to_string())
                .map_err(|source| CodecError::AtIndex {
                    index,
                    source: Box::new(source),
                })
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(format!("[{}]", parts.join(", ")))
}

/// Symbol sequence of an encoded vector, counting brackets and commas as one
/// symbol each.
pub fn vector_symbols<T: Scalar>(xs: &[T], cfg: &CodecConfig) -> Result<Vec<String>, CodecError> {
    let text = encode_vector(xs, cfg)?;
    Ok(split_symbols(&text)?.into_iter().map(str::to_string).collect())
}

/// Parses a bracketed SNE array back to numbers.
pub fn decode_vector<T: Scalar>(text: &str) -> Result<Vec<T>, CodecError> {
    let symbols = split_symbols(text)?;
    let inner = match (symbols.first(), symbols.last()) {
        (Some(&"["), Some(&"]")) if symbols.len() >= 2 => &symbols[1..symbols.len() - 1],
        _ => return Err(CodecError::MalformedToken(text.to_string())),
    };
    if inner.is_empty() {
        return Ok(Vec::new());
    }
    inner
        .split(|s| *s == ",")
        .map(|chunk| EncodedNumber::from_symbols(chunk).map(|e| e.decode()))
        .collect()
}

/// Unit in the last place near magnitude `10^k`: `10^(k+1-gamma)`.
pub fn ulp<T: Scalar>(k: i32, gamma: usize) -> T {
    pow10(k + 1 - gamma as i32)
}

pub fn abs_error_bound<T: Scalar>(k: i32, gamma: usize) -> T {
    ulp::<T>(k, gamma) / T::of(2.0)
}

pub fn rel_error_bound<T: Scalar>(gamma: usize) -> T {
    pow10::<T>(1 - gamma as i32) / T::of(2.0)
}

/// Smallest and largest nonzero representable magnitudes.
pub fn representable_range<T: Scalar>(cfg: &CodecConfig) -> (T, T) {
    let lo = pow10(cfg.k_min);
    let top_mantissa = T::of(10.0) - pow10::<T>(1 - cfg.gamma as i32);
    (lo, top_mantissa * pow10(cfg.k_max))
}

fn pow10<T: Scalar>(e: i32) -> T {
    // Parsing is exact to the nearest value; powi accumulates error for large |e|.
    format!("1e{e}").parse::<T>().unwrap_or_else(|_| T::of(10f64.powi(e)))
}

/// Symbols in one encoded scalar: sign, exponent and `gamma` digits.
pub fn scalar_token_len(gamma: usize) -> usize {
    gamma + 2
}

/// Symbols in an encoded array of `dim` scalars including brackets and commas.
pub fn array_token_len(dim: usize, gamma: usize) -> usize {
    if dim == 0 {
        2
    } else {
        dim * (gamma + 3) + 1
    }
}

/// Largest dimensionality whose metadata plus encoded decision vector fits in
/// `l_max` input tokens.
pub fn token_budget(l_max: usize, l_m: usize, gamma: usize) -> Result<usize, CodecError> {
    let exhausted = CodecError::BudgetExhausted { l_max, l_m, gamma };
    if l_max <= l_m + 1 {
        return Err(exhausted);
    }
    let d_max = (l_max - l_m - 1) / (gamma + 3);
    if d_max < 1 {
        return Err(exhausted);
    }
    Ok(d_max)
}
