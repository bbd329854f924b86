//! Summary cleaning, tokenisation, vocabulary building and fixed-length encoding.

mod vocab;

use serde::{Deserialize, Serialize};

pub use vocab::{build_vocab, Vocab, VocabError, OOV, PAD};

/// Encoded summaries are trimmed or zero-padded to this many tokens.
pub const SUMMARY_LEN: usize = 100;

/// Deletes every non-ASCII code point and ASCII control characters other than whitespace.
pub fn clean_summary(text: &str) -> String {
    text.chars().filter(|c| c.is_ascii() && (!c.is_ascii_control() || c.is_ascii_whitespace())).collect()
}

/// Lowercased maximal runs of ASCII alphanumerics.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_ascii_alphanumeric()).filter(|t| !t.is_empty()).map(str::to_ascii_lowercase).collect()
}

/// Token indices padded with [`PAD`] to exactly [`SUMMARY_LEN`].
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct EncodedSummary(Vec<usize>);

impl EncodedSummary {
    pub fn indices(&self) -> &[usize] {
        &self.0
    }

    /// Number of non-padding positions.
    pub fn content_len(&self) -> usize {
        self.0.iter().position(|&i| i == PAD).unwrap_or(self.0.len())
    }
}

pub fn encode_summary<S: AsRef<str>>(tokens: &[S], vocab: &Vocab) -> EncodedSummary {
    let mut out: Vec<usize> = tokens.iter().take(SUMMARY_LEN).map(|t| vocab.index_of(t.as_ref())).collect();
    out.resize(SUMMARY_LEN, PAD);
    EncodedSummary(out)
}

/// `encode_summary(tokenize(clean_summary(text)))`.
pub fn encode_text(text: &str, vocab: &Vocab) -> EncodedSummary {
    encode_summary(&tokenize(&clean_summary(text)), vocab)
}
