use serde::{Deserialize, Serialize};

use super::DataError;

/// An ordered, non-empty list of vocabulary ids with optional source text.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenSequence {
    tokens: Vec<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    text: Option<String>,
}

impl TokenSequence {
    pub fn new(tokens: Vec<u32>) -> Result<Self, DataError> {
        if tokens.is_empty() {
            return Err(DataError::EmptySequence);
        }
        Ok(Self { tokens, text: None })
    }

    pub fn with_text(mut self, text: impl Into<String>) -> Self {
        self.text = Some(text.into());
        self
    }

    pub fn tokens(&self) -> &[u32] {
        &self.tokens
    }

    pub fn text(&self) -> Option<&str> {
        self.text.as_deref()
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    /// Always false; sequences hold at least one token.
    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn check_vocab(&self, vocab_size: usize) -> Result<(), DataError> {
        match self
            .tokens
            .iter()
            .enumerate()
            .find(|(_, &id)| id as usize >= vocab_size)
        {
            Some((pos, &id)) => Err(DataError::TokenOutOfVocab {
                id,
                position: pos + 1,
                vocab_size,
            }),
            None => Ok(()),
        }
    }

    /// Keeps the first `len` tokens. The source text no longer matches and is dropped.
    pub fn truncated(&self, len: usize) -> Self {
        if len >= self.tokens.len() {
            return self.clone();
        }
        Self {
            tokens: self.tokens[..len.max(1)].to_vec(),
            text: None,
        }
    }
}

/// A token sequence with its ground-truth membership label.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledSample {
    pub sample_id: String,
    pub sequence: TokenSequence,
    /// 1 = member, 0 = non-member.
    pub label: u8,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub group: Option<String>,
}

impl LabeledSample {
    pub fn new(
        sample_id: impl Into<String>,
        sequence: TokenSequence,
        label: u8,
    ) -> Result<Self, DataError> {
        if label > 1 {
            return Err(DataError::InvalidLabel(label));
        }
        Ok(Self {
            sample_id: sample_id.into(),
            sequence,
            label,
            group: None,
        })
    }

    pub fn with_group(mut self, group: impl Into<String>) -> Self {
        self.group = Some(group.into());
        self
    }
}
