//! Character-level tokenizer for templated word pairs.
//!
//! Sequences follow the layout `CLS a1..an SEP b1..bm SEP PAD...`, always
//! padded/truncated to exactly `max_len` ids. Truncation drops word
//! characters from the right, longer side first, so the three structure
//! tokens always survive.

use crate::error::{Error, Result};
use std::collections::HashMap;

pub const PAD: u32 = 0;
pub const UNK: u32 = 1;
pub const CLS: u32 = 2;
pub const SEP: u32 = 3;

/// Number of reserved special ids before the character block.
pub const N_SPECIALS: usize = 4;

#[derive(Debug, Clone, Copy)]
pub struct TokenizerConfig {
    pub max_len: usize,
}

impl Default for TokenizerConfig {
    fn default() -> Self {
        TokenizerConfig { max_len: 64 }
    }
}

impl TokenizerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_len < 8 {
            return Err(Error::invalid("tokenizer.max_len", "must be >= 8"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct CharTokenizer {
    max_len: usize,
    chars: Vec<char>,
    ids: HashMap<char, u32>,
}

impl CharTokenizer {
    /// Build the character vocabulary from a training corpus. Characters are
    /// stored sorted by code point, so the vocabulary is independent of text
    /// order.
    pub fn build<'a>(texts: impl IntoIterator<Item = &'a str>, cfg: TokenizerConfig) -> Result<Self> {
        let mut chars: Vec<char> = texts
            .into_iter()
            .flat_map(|t| t.chars())
            .collect::<std::collections::BTreeSet<char>>()
            .into_iter()
            .collect();
        chars.sort_unstable();
        Self::from_parts(chars, cfg.max_len)
    }

    /// Reassemble a tokenizer from its serialized parts.
    pub fn from_parts(chars: Vec<char>, max_len: usize) -> Result<Self> {
        TokenizerConfig { max_len }.validate()?;
        let mut ids = HashMap::with_capacity(chars.len());
        for (i, &c) in chars.iter().enumerate() {
            if ids.insert(c, N_SPECIALS as u32 + i as u32).is_some() {
                return Err(Error::invalid(
                    "tokenizer",
                    format!("duplicate character `{c}`"),
                ));
            }
        }
        Ok(CharTokenizer { max_len, chars, ids })
    }

    pub fn max_len(&self) -> usize {
        self.max_len
    }

    pub fn chars(&self) -> &[char] {
        &self.chars
    }

    pub fn vocab_size(&self) -> usize {
        N_SPECIALS + self.chars.len()
    }

    fn id_of(&self, c: char) -> u32 {
        self.ids.get(&c).copied().unwrap_or(UNK)
    }

    /// Encode a text pair. Total: unknown characters become UNK and overlong
    /// inputs are truncated (never an error).
    pub fn tokenize_pair(&self, text_a: &str, text_b: &str) -> Vec<u32> {
        let mut a: Vec<char> = text_a.chars().collect();
        let mut b: Vec<char> = text_b.chars().collect();
        let budget = self.max_len - 3;
        while a.len() + b.len() > budget {
            if a.len() > b.len() {
                a.pop();
            } else {
                b.pop();
            }
        }
        let mut ids = Vec::with_capacity(self.max_len);
        ids.push(CLS);
        ids.extend(a.into_iter().map(|c| self.id_of(c)));
        ids.push(SEP);
        ids.extend(b.into_iter().map(|c| self.id_of(c)));
        ids.push(SEP);
        ids.resize(self.max_len, PAD);
        ids
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy() -> CharTokenizer {
        CharTokenizer::build(["abcd"], TokenizerConfig { max_len: 8 }).unwrap()
    }

    #[test]
    fn layout_cls_sep_sep_pad() {
        let tok = toy();
        let a = tok.id_of('a');
        let b = tok.id_of('b');
        let c = tok.id_of('c');
        let d = tok.id_of('d');
        assert_eq!(
            tok.tokenize_pair("ab", "cd"),
            vec![CLS, a, b, SEP, c, d, SEP, PAD]
        );
    }

    #[test]
    fn unknown_characters_become_unk() {
        let tok = toy();
        let ids = tok.tokenize_pair("az", "b");
        assert_eq!(ids[2], UNK);
        assert_eq!(ids.len(), 8);
    }

    #[test]
    fn truncation_keeps_structure_tokens() {
        let tok = toy();
        let ids = tok.tokenize_pair("aaaaaaaaaa", "bbb");
        assert_eq!(ids.len(), 8);
        assert_eq!(ids[0], CLS);
        assert_eq!(ids.iter().filter(|&&t| t == SEP).count(), 2);
        // Longer side trimmed first: budget 5 splits as 3 a-chars + 2 b-chars.
        let a = tok.id_of('a');
        let b = tok.id_of('b');
        assert_eq!(ids, vec![CLS, a, a, a, SEP, b, b, SEP]);
    }

    #[test]
    fn empty_words_still_fit() {
        let tok = toy();
        let ids = tok.tokenize_pair("", "");
        assert_eq!(ids[0], CLS);
        assert_eq!(ids[1], SEP);
        assert_eq!(ids[2], SEP);
        assert_eq!(ids.len(), 8);
    }

    #[test]
    fn max_len_floor_enforced() {
        assert!(CharTokenizer::build(["ab"], TokenizerConfig { max_len: 7 }).is_err());
    }

    #[test]
    fn vocabulary_is_sorted_and_deduplicated() {
        let tok = CharTokenizer::build(["cba", "abx"], TokenizerConfig::default()).unwrap();
        assert_eq!(tok.chars(), &['a', 'b', 'c', 'x']);
        assert_eq!(tok.vocab_size(), 4 + 4);
    }
}
