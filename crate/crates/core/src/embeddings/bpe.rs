//! Byte-level BPE as used by RoBERTa-family checkpoints.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// The reversible byte → printable-char table of byte-level BPE.
fn byte_alphabet() -> [char; 256] {
    let mut table = ['\0'; 256];
    let mut extra = 0u32;
    for b in 0..=255u32 {
        let printable = (0x21..=0x7e).contains(&b) || (0xa1..=0xac).contains(&b) || (0xae..=0xff).contains(&b);
        let cp = if printable {
            b
        } else {
            extra += 1;
            255 + extra
        };
        table[b as usize] = char::from_u32(cp).unwrap();
    }
    table
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Class {
    Letter,
    Number,
    Space,
    Other,
}

fn class(c: char) -> Class {
    if c.is_alphabetic() {
        Class::Letter
    } else if c.is_numeric() {
        Class::Number
    } else if c.is_whitespace() {
        Class::Space
    } else {
        Class::Other
    }
}

/// GPT-2 style pre-tokenization:
/// `'s|'t|'re|'ve|'m|'ll|'d| ?\p{L}+| ?\p{N}+| ?[^\s\p{L}\p{N}]+|\s+(?!\S)|\s+`.
/// Letters and numbers are approximated with `char::is_alphabetic` and
/// `char::is_numeric`.
pub(crate) fn pre_tokenize(text: &str) -> Vec<&str> {
    let idx: Vec<(usize, char)> = text.char_indices().collect();
    let n = idx.len();
    let byte_at = |i: usize| if i < n { idx[i].0 } else { text.len() };
    let mut out = Vec::new();
    let mut i = 0;
    while i < n {
        let c = idx[i].1;
        // contractions
        if c == '\'' {
            let rest = &text[byte_at(i + 1)..];
            let contraction = ["s", "t", "re", "ve", "m", "ll", "d"]
                .iter()
                .filter(|s| rest.starts_with(*s))
                .map(|s| s.chars().count())
                .max_by_key(|&len| len);
            if let Some(len) = contraction {
                out.push(&text[byte_at(i)..byte_at(i + 1 + len)]);
                i += 1 + len;
                continue;
            }
        }
        let k = if c == ' ' { i + 1 } else { i };
        if k < n {
            let cls = class(idx[k].1);
            if cls != Class::Space {
                let mut j = k + 1;
                while j < n && class(idx[j].1) == cls {
                    j += 1;
                }
                out.push(&text[byte_at(i)..byte_at(j)]);
                i = j;
                continue;
            }
        }
        // whitespace run
        let mut j = i + 1;
        while j < n && class(idx[j].1) == Class::Space {
            j += 1;
        }
        let end = if j < n && j - i > 1 { j - 1 } else { j };
        out.push(&text[byte_at(i)..byte_at(end)]);
        i = end;
    }
    out
}

#[derive(Debug, Clone)]
pub struct BpeTokenizer {
    vocab: BTreeMap<String, u32>,
    ranks: BTreeMap<(String, String), usize>,
    alphabet: [char; 256],
    unk_id: u32,
}

impl BpeTokenizer {
    /// `vocab` maps token strings to ids; `merges` is the ordered merge list
    /// (the text of `merges.txt`, `#version` header allowed).
    pub fn new(vocab: BTreeMap<String, u32>, merges: &str, unk_token: &str) -> Result<Self> {
        let mut ranks = BTreeMap::new();
        for (line_no, line) in merges.lines().enumerate() {
            let line = line.trim_end_matches('\r');
            if line.starts_with("#version") || line.trim().is_empty() {
                continue;
            }
            let mut parts = line.split(' ');
            match (parts.next(), parts.next(), parts.next()) {
                (Some(a), Some(b), None) => {
                    let next = ranks.len();
                    ranks.entry((a.to_string(), b.to_string())).or_insert(next);
                }
                _ => return Err(Error::Encoder(format!("merges line {}: expected two symbols", line_no + 1))),
            }
        }
        let unk_id = *vocab
            .get(unk_token)
            .ok_or_else(|| Error::Encoder(format!("vocabulary lacks unknown token `{unk_token}`")))?;
        Ok(BpeTokenizer { vocab, ranks, alphabet: byte_alphabet(), unk_id })
    }

    pub fn token_id(&self, token: &str) -> Option<u32> {
        self.vocab.get(token).copied()
    }

    fn bpe(&self, word: &str) -> Vec<String> {
        let mut symbols: Vec<String> = word.chars().map(|c| c.to_string()).collect();
        while symbols.len() > 1 {
            let best = symbols
                .windows(2)
                .enumerate()
                .filter_map(|(i, pair)| self.ranks.get(&(pair[0].clone(), pair[1].clone())).map(|&r| (r, i)))
                .min();
            let Some((rank, _)) = best else { break };
            let mut merged = Vec::with_capacity(symbols.len());
            let mut i = 0;
            while i < symbols.len() {
                if i + 1 < symbols.len() && self.ranks.get(&(symbols[i].clone(), symbols[i + 1].clone())) == Some(&rank) {
                    merged.push(format!("{}{}", symbols[i], symbols[i + 1]));
                    i += 2;
                } else {
                    merged.push(core::mem::take(&mut symbols[i]));
                    i += 1;
                }
            }
            symbols = merged;
        }
        symbols
    }

    /// Subword ids for `text`, without special tokens.
    pub fn encode(&self, text: &str) -> Vec<u32> {
        let mut ids = Vec::new();
        for piece in pre_tokenize(text) {
            let mapped: String = piece.bytes().map(|b| self.alphabet[b as usize]).collect();
            for sym in self.bpe(&mapped) {
                ids.push(self.vocab.get(&sym).copied().unwrap_or(self.unk_id));
            }
        }
        ids
    }
}
