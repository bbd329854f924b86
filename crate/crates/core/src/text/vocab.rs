//! Word-index vocabulary and its text serialisation.
//!
//! File layout, one entry per line, tab separated:
//!
//! ```text
//! <PAD>\t0
//! <OOV>\t1
//! word\t2
//! ...
//! ```

use std::collections::HashMap;
use std::io;
use std::path::Path;

use thiserror::Error;

pub const PAD: usize = 0;
pub const OOV: usize = 1;

const PAD_TOKEN: &str = "<PAD>";
const OOV_TOKEN: &str = "<OOV>";

#[derive(Debug, Error)]
pub enum VocabError {
    #[error("MalformedVocab: line {line}: {reason}")]
    Malformed { line: usize, reason: String },
    #[error("Io: {0}")]
    Io(#[from] io::Error),
}

/// Injective word→index map; words are numbered from 2 in first-seen order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Vocab {
    index: HashMap<String, usize>,
    words: Vec<String>,
}

impl Vocab {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds `word` if unseen and returns its index.
    pub fn insert(&mut self, word: &str) -> usize {
        if let Some(&i) = self.index.get(word) {
            return i;
        }
        let i = self.words.len() + 2;
        self.words.push(word.to_string());
        self.index.insert(word.to_string(), i);
        i
    }

    pub fn index_of(&self, word: &str) -> usize {
        self.index.get(word).copied().unwrap_or(OOV)
    }

    pub fn contains(&self, word: &str) -> bool {
        self.index.contains_key(word)
    }

    /// Number of real words (PAD and OOV excluded).
    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    /// Rows an embedding table needs to cover every index this vocabulary emits.
    pub fn table_size(&self) -> usize {
        self.words.len() + 2
    }

    /// Words in index order.
    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("{PAD_TOKEN}\t{PAD}\n{OOV_TOKEN}\t{OOV}\n");
        for (i, w) in self.words.iter().enumerate() {
            out.push_str(w);
            out.push('\t');
            out.push_str(&(i + 2).to_string());
            out.push('\n');
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self, VocabError> {
        let bad = |line: usize, reason: &str| VocabError::Malformed { line, reason: reason.to_string() };
        let mut vocab = Vocab::new();
        let mut lines = text.lines().enumerate();
        for (expected_tok, expected_idx) in [(PAD_TOKEN, PAD), (OOV_TOKEN, OOV)] {
            let (i, line) = lines.next().ok_or_else(|| bad(expected_idx + 1, "missing header"))?;
            if line != format!("{expected_tok}\t{expected_idx}") {
                return Err(bad(i + 1, "bad header line"));
            }
        }
        for (i, line) in lines {
            if line.is_empty() {
                continue;
            }
            let (word, idx) = line.split_once('\t').ok_or_else(|| bad(i + 1, "missing tab"))?;
            let idx: usize = idx.parse().map_err(|_| bad(i + 1, "index is not an integer"))?;
            if word.is_empty() || word.contains(char::is_whitespace) {
                return Err(bad(i + 1, "invalid word"));
            }
            if vocab.contains(word) {
                return Err(bad(i + 1, "duplicate word"));
            }
            if idx != vocab.words.len() + 2 {
                return Err(bad(i + 1, "indices must be contiguous from 2"));
            }
            vocab.insert(word);
        }
        Ok(vocab)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), VocabError> {
        crate::trailer::atomic_write(path.as_ref(), self.to_text().as_bytes())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, VocabError> {
        let bytes = std::fs::read(path)?;
        let text =
            String::from_utf8(bytes).map_err(|_| VocabError::Malformed { line: 0, reason: "invalid UTF-8".into() })?;
        Self::parse(&text)
    }
}

/// Indexes every distinct token in corpus order.
pub fn build_vocab<S: AsRef<str>, D: AsRef<[S]>>(corpus: &[D]) -> Vocab {
    let mut vocab = Vocab::new();
    for doc in corpus {
        for tok in doc.as_ref() {
            vocab.insert(tok.as_ref());
        }
    }
    vocab
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn first_seen_order() {
        let v = build_vocab(&[vec!["a", "b"], vec!["b", "c"]]);
        assert_eq!((v.index_of("a"), v.index_of("b"), v.index_of("c")), (2, 3, 4));
        assert_eq!(v.index_of("d"), OOV);
        assert_eq!(v.len(), 3);
    }

    #[test]
    fn empty_corpus() {
        let v = build_vocab::<&str, Vec<&str>>(&[]);
        assert!(v.is_empty());
        assert_eq!(v.table_size(), 2);
        assert_eq!(v.to_text(), "<PAD>\t0\n<OOV>\t1\n");
    }

    #[test]
    fn deterministic() {
        assert_eq!(build_vocab(&[vec!["x"]]), build_vocab(&[vec!["x"]]));
    }

    #[test]
    fn parse_rejects_bad_files() {
        assert!(Vocab::parse("").is_err());
        assert!(Vocab::parse("<PAD>\t0\n").is_err());
        assert!(Vocab::parse("<PAD>\t0\n<OOV>\t1\na\t3\n").is_err());
        assert!(Vocab::parse("<PAD>\t0\n<OOV>\t1\na\t2\na\t3\n").is_err());
        assert!(Vocab::parse("<PAD>\t0\n<OOV>\t1\na 2\n").is_err());
        assert!(Vocab::parse("<PAD>\t0\n<OOV>\t1\na\tx\n").is_err());
    }

    proptest! {
        #[test]
        fn text_round_trip(docs in prop::collection::vec(prop::collection::vec("[a-z0-9]{1,8}", 0..20), 0..10)) {
            let v = build_vocab(&docs);
            let back = Vocab::parse(&v.to_text()).unwrap();
            prop_assert_eq!(&back, &v);
            // injective, never 0 or 1
            let mut seen = std::collections::HashSet::new();
            for w in v.words() {
                let i = v.index_of(w);
                prop_assert!(i >= 2);
                prop_assert!(seen.insert(i));
            }
        }
    }
}
