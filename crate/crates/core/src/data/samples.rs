use std::collections::HashSet;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{DataError, LabeledSample, TokenSequence};

/// Vocabulary size needed by [`byte_tokens`].
pub const BYTE_VOCAB: usize = 256;

/// One line of a sample manifest: `{id, text, label, group}` with optional
/// explicit `tokens` taking precedence over `text`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampleLine {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub text: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tokens: Option<Vec<u32>>,
    pub label: u8,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub group: Option<String>,
}

/// UTF-8 bytes of `text` as token ids.
pub fn byte_tokens(text: &str) -> Result<TokenSequence, DataError> {
    Ok(TokenSequence::new(text.bytes().map(u32::from).collect())?.with_text(text))
}

impl SampleLine {
    pub fn to_sample(&self, vocab_size: usize) -> Result<LabeledSample, DataError> {
        let seq = match (&self.tokens, &self.text) {
            (Some(t), text) => {
                let s = TokenSequence::new(t.clone())?;
                match text {
                    Some(x) => s.with_text(x.clone()),
                    None => s,
                }
            }
            (None, Some(text)) => {
                if vocab_size < BYTE_VOCAB {
                    return Err(DataError::InvalidShape(format!(
                        "byte tokenization of {:?} needs vocab_size >= {BYTE_VOCAB}, model has {vocab_size}",
                        self.id
                    )));
                }
                byte_tokens(text)?
            }
            (None, None) => return Err(DataError::EmptySequence),
        };
        seq.check_vocab(vocab_size)?;
        let s = LabeledSample::new(self.id.clone(), seq, self.label)?;
        Ok(match &self.group {
            Some(g) => s.with_group(g.clone()),
            None => s,
        })
    }
}

/// Reads a JSON-lines sample manifest; blank lines are skipped and ids must
/// be unique.
pub fn read_samples(path: impl AsRef<Path>, vocab_size: usize) -> Result<Vec<LabeledSample>, DataError> {
    let reader = BufReader::new(File::open(path)?);
    let mut out = Vec::new();
    let mut seen = HashSet::new();
    for (n, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let bad = |message: String| DataError::BadSampleLine { line: n + 1, message };
        let parsed: SampleLine = serde_json::from_str(&line).map_err(|e| bad(e.to_string()))?;
        if !seen.insert(parsed.id.clone()) {
            return Err(DataError::DuplicateSampleId(parsed.id));
        }
        out.push(parsed.to_sample(vocab_size).map_err(|e| bad(e.to_string()))?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn text_and_explicit_tokens() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("s.jsonl");
        std::fs::write(
            &p,
            "{\"id\":\"a\",\"text\":\"hi\",\"label\":1}\n\n{\"id\":\"b\",\"tokens\":[3,4,5],\"label\":0,\"group\":\"g\"}\n",
        )
        .unwrap();
        let s = read_samples(&p, 300).unwrap();
        assert_eq!(s[0].sequence.tokens(), &[104, 105]);
        assert_eq!(s[1].sequence.tokens(), &[3, 4, 5]);
        assert_eq!(s[1].group.as_deref(), Some("g"));
        assert!(read_samples(&p, 100).is_err());
    }

    #[test]
    fn duplicate_and_malformed_lines() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("s.jsonl");
        std::fs::write(&p, "{\"id\":\"a\",\"tokens\":[1],\"label\":1}\n{\"id\":\"a\",\"tokens\":[1],\"label\":1}\n").unwrap();
        assert!(matches!(read_samples(&p, 10), Err(DataError::DuplicateSampleId(_))));
        std::fs::write(&p, "{\"id\":\"a\",\"tokens\":[1],\"label\":2}\n").unwrap();
        assert!(matches!(read_samples(&p, 10), Err(DataError::BadSampleLine { line: 1, .. })));
    }
}
