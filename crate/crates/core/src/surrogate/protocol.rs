//! JSON bodies of the prediction service.
//!
//! `POST /predict` takes a [`PredictRequest`] and answers a [`PredictReply`];
//! `POST /predict_batch` wraps both in `{"items": [...]}` and keeps order;
//! `GET /health` answers [`HealthReply`]. Errors are `{"error": ...}` with
//! status 400 (malformed request), 404 (unknown task), 422 (unparseable model
//! output) or 503 (model not loaded).

use serde::{Deserialize, Serialize};

use super::SurrogateError;
use crate::prompt::PromptTemplate;
use crate::token::{uncertainty_scores, StepDistribution, UncertaintyReport, Vocabulary};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecodeStrategy {
    Greedy,
    Beam,
    TopK,
    TopP,
    Temperature,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecodeSpec {
    pub strategy: DecodeStrategy,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub width: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl DecodeSpec {
    pub fn greedy() -> Self {
        Self {
            strategy: DecodeStrategy::Greedy,
            width: None,
            k: None,
            p: None,
            t: None,
            seed: None,
        }
    }

    pub fn beam(width: usize) -> Self {
        Self {
            strategy: DecodeStrategy::Beam,
            width: Some(width),
            ..Self::greedy()
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        match self.strategy {
            DecodeStrategy::Greedy => Ok(()),
            DecodeStrategy::Beam => match self.width {
                Some(w) if w >= 1 => Ok(()),
                Some(_) => Err("beam width must be >= 1".into()),
                None => Ok(()),
            },
            DecodeStrategy::TopK => match self.k {
                Some(k) if k >= 1 => Ok(()),
                _ => Err("top_k needs k >= 1".into()),
            },
            DecodeStrategy::TopP => match self.p {
                Some(p) if p > 0.0 && p <= 1.0 => Ok(()),
                _ => Err("top_p needs p in (0, 1]".into()),
            },
            DecodeStrategy::Temperature => match self.t {
                Some(t) if t >= 0.0 && t.is_finite() => Ok(()),
                _ => Err("temperature needs t >= 0".into()),
            },
        }
    }
}

impl Default for DecodeSpec {
    fn default() -> Self {
        Self::greedy()
    }
}

fn default_top_k_probs() -> usize {
    5
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictRequest {
    /// Rendered metadata string of the task.
    pub metadata: String,
    pub x: Vec<f64>,
    pub gamma: usize,
    #[serde(default)]
    pub template: PromptTemplate,
    /// Server default when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub decode: Option<DecodeSpec>,
    #[serde(default)]
    pub return_probs: bool,
    #[serde(default = "default_top_k_probs")]
    pub top_k_probs: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbEntry {
    pub token: String,
    pub p: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictReply {
    pub y: f64,
    pub raw_text: String,
    /// Generated tokens including brackets and the end marker.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tokens: Option<Vec<String>>,
    /// Most probable entries per generated token, aligned with `tokens`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub step_probs: Option<Vec<Vec<ProbEntry>>>,
    /// Scores over the sign, exponent and digit positions.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub uncertainty: Option<UncertaintyReport<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorReply {
    pub error: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub status: Option<u16>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchRequest {
    pub items: Vec<PredictRequest>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum BatchItem {
    Ok(PredictReply),
    Err(ErrorReply),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchReply {
    pub items: Vec<BatchItem>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HealthReply {
    pub status: String,
    pub model: String,
}

/// Maps an HTTP error status and body to the client error kind.
pub fn error_for_status(status: u16, body: &str) -> SurrogateError {
    let message = serde_json::from_str::<ErrorReply>(body)
        .map(|e| e.error)
        .unwrap_or_else(|_| body.chars().take(200).collect());
    match status {
        422 => SurrogateError::UnparseableOutput(message),
        500..=599 => SurrogateError::ServerError { status, message },
        _ => SurrogateError::ProtocolError(format!("HTTP {status}: {message}")),
    }
}

/// Rebuilds full distributions from truncated `step_probs`, spreading the
/// missing mass evenly over the unlisted tokens, and scores the payload
/// positions (those between the brackets).
pub fn uncertainty_from_step_probs(
    tokens: &[String],
    step_probs: &[Vec<ProbEntry>],
    vocab: &Vocabulary,
) -> Result<UncertaintyReport<f64>, SurrogateError> {
    if tokens.len() != step_probs.len() {
        return Err(SurrogateError::ProtocolError(
            "tokens and step_probs differ in length".into(),
        ));
    }
    let open = tokens.iter().position(|t| t == "[");
    let close = tokens.iter().position(|t| t == "]");
    let (open, close) = match (open, close) {
        (Some(o), Some(c)) if c > o + 1 => (o, c),
        _ => return Err(SurrogateError::UnparseableOutput(tokens.join(" "))),
    };
    let proto = |e: crate::token::TokenError| SurrogateError::ProtocolError(e.to_string());
    let n = vocab.len();
    let mut dists = Vec::new();
    let mut chosen = Vec::new();
    for (tok, entries) in tokens[open + 1..close].iter().zip(&step_probs[open + 1..close]) {
        let mut probs = vec![f64::NAN; n];
        let mut listed = 0.0;
        for e in entries {
            let id = vocab.id(&e.token).map_err(proto)?;
            probs[id] = e.p.max(0.0);
            listed += e.p.max(0.0);
        }
        let unlisted = probs.iter().filter(|p| p.is_nan()).count();
        let rest = if unlisted > 0 {
            (1.0 - listed).max(0.0) / unlisted as f64
        } else {
            0.0
        };
        for p in probs.iter_mut().filter(|p| p.is_nan()) {
            *p = rest;
        }
        dists.push(StepDistribution::from_weights(probs).map_err(proto)?);
        chosen.push(vocab.id(tok).map_err(proto)?);
    }
    uncertainty_scores(&dists, &chosen, None).map_err(proto)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn request_defaults_and_shape() {
        let r: PredictRequest = serde_json::from_str(r#"{"metadata":"m","x":[1.0],"gamma":4}"#).unwrap();
        assert_eq!(r.template, PromptTemplate::Small);
        assert_eq!(r.decode, None);
        assert!(!r.return_probs);
        let json = serde_json::to_value(PredictRequest {
            decode: Some(DecodeSpec::beam(3)),
            ..r
        })
        .unwrap();
        assert_eq!(json["decode"]["strategy"], "beam");
        assert_eq!(json["decode"]["width"], 3);
        assert_eq!(json["template"], "small");
    }

    #[test]
    fn batch_items_untagged() {
        let b: BatchReply = serde_json::from_str(
            r#"{"items":[{"y":1.5,"raw_text":"[+ <10^0> 1 5]"},{"error":"unknown task","status":404}]}"#,
        )
        .unwrap();
        assert!(matches!(b.items[0], BatchItem::Ok(_)));
        assert!(matches!(b.items[1], BatchItem::Err(_)));
    }

    #[test]
    fn status_mapping() {
        assert!(matches!(error_for_status(422, "{\"error\":\"x\"}"), SurrogateError::UnparseableOutput(m) if m == "x"));
        assert!(matches!(
            error_for_status(503, ""),
            SurrogateError::ServerError { status: 503, .. }
        ));
        assert!(matches!(error_for_status(404, ""), SurrogateError::ProtocolError(_)));
    }
}
