use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::TokenError;
use crate::prompt::{END_MARKER, START_MARKER};
use crate::sne::{exponent_token, CodecConfig, EncodedNumber};

pub type TokenId = usize;

/// Ordered token set for numeric targets: markers, brackets, comma, signs,
/// digits and one exponent token per `k` in the configured range.
///
/// Serialized as a plain JSON array of token strings; the index of a token in
/// that array is its id.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<String>", into = "Vec<String>")]
pub struct Vocabulary {
    entries: Vec<String>,
    #[serde(skip)]
    index: HashMap<String, TokenId>,
}

impl Vocabulary {
    pub fn for_codec(cfg: &CodecConfig) -> Self {
        let mut entries: Vec<String> = [START_MARKER, END_MARKER, "[", "]", ",", "+", "-"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        entries.extend((0..10).map(|d| d.to_string()));
        entries.extend((cfg.k_min..=cfg.k_max).map(exponent_token));
        Self::from_entries(entries).expect("generated vocabulary has no duplicates")
    }

    pub fn from_entries(entries: Vec<String>) -> Result<Self, TokenError> {
        let mut index = HashMap::with_capacity(entries.len());
        for (i, tok) in entries.iter().enumerate() {
            if index.insert(tok.clone(), i).is_some() {
                return Err(TokenError::DuplicateToken(tok.clone()));
            }
        }
        Ok(Self { entries, index })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn id(&self, token: &str) -> Result<TokenId, TokenError> {
        self.index
            .get(token)
            .copied()
            .ok_or_else(|| TokenError::UnknownToken(token.to_string()))
    }

    pub fn token(&self, id: TokenId) -> Result<&str, TokenError> {
        self.entries
            .get(id)
            .map(String::as_str)
            .ok_or(TokenError::UnknownId(id))
    }

    pub fn entries(&self) -> &[String] {
        &self.entries
    }

    pub fn end_id(&self) -> Option<TokenId> {
        self.index.get(END_MARKER).copied()
    }

    pub fn encode_tokens<S: AsRef<str>>(&self, tokens: &[S]) -> Result<Vec<TokenId>, TokenError> {
        tokens.iter().map(|t| self.id(t.as_ref())).collect()
    }

    pub fn decode_ids(&self, ids: &[TokenId]) -> Result<Vec<&str>, TokenError> {
        ids.iter().map(|&i| self.token(i)).collect()
    }

    /// Bracket-stripped target ids of a fitness value: sign, exponent, digits.
    pub fn target_ids(&self, value: &EncodedNumber) -> Result<Vec<TokenId>, TokenError> {
        self.encode_tokens(&value.tokens())
    }

    /// Full generated sequence for a fitness value: `[`, payload, `]`, end marker.
    pub fn sequence_ids(&self, value: &EncodedNumber) -> Result<Vec<TokenId>, TokenError> {
        let mut ids = vec![self.id("[")?];
        ids.extend(self.target_ids(value)?);
        ids.push(self.id("]")?);
        ids.push(self.id(END_MARKER)?);
        Ok(ids)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.entries).expect("string list serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, TokenError> {
        let entries: Vec<String> = serde_json::from_str(text).map_err(|e| TokenError::Format(e.to_string()))?;
        Self::from_entries(entries)
    }
}

impl TryFrom<Vec<String>> for Vocabulary {
    type Error = TokenError;

    fn try_from(entries: Vec<String>) -> Result<Self, Self::Error> {
        Self::from_entries(entries)
    }
}

impl From<Vocabulary> for Vec<String> {
    fn from(v: Vocabulary) -> Self {
        v.entries
    }
}
