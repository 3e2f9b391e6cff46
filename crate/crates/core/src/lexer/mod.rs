//! Source normalization and tokenization for the skip-gram path.
//!
//! [`normalize`] strips comments and docstrings while remembering where
//! every surviving character came from, so vulnerable spans annotated on
//! the raw text can be carried onto the token stream. [`tokenize`] then
//! produces tokens with character offsets into the normalized text.

mod normalize;
mod scan;
mod tokenize;

use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

pub use normalize::{normalize, Normalized};
pub use tokenize::{
    tokenize, DEDENT_MARKER, INDENT_MARKER, NEWLINE_MARKER, NUMBER_SENTINEL, STRING_SENTINEL,
};

use crate::corpus::{SourceUnit, Span};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct LexerOptions {
    /// Remove comments and docstrings before tokenizing.
    pub strip_comments: bool,
    /// Replace string and numeric literals with `strlit` / `numlit`.
    pub literal_sentinels: bool,
}

impl Default for LexerOptions {
    fn default() -> Self {
        LexerOptions { strip_comments: true, literal_sentinels: true }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TokenKind {
    Name,
    Number,
    Str,
    Op,
    Newline,
    Indent,
    Dedent,
    Other,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Token {
    pub text: String,
    pub start: usize,
    pub end: usize,
    pub kind: TokenKind,
}

impl Token {
    pub fn span(&self) -> Span {
        Span::new(self.start, self.end)
    }

    /// True when `text` is a placeholder rather than the covered characters.
    pub fn is_sentinel(&self) -> bool {
        match self.kind {
            TokenKind::Newline | TokenKind::Indent | TokenKind::Dedent => true,
            TokenKind::Str | TokenKind::Number => {
                self.text == STRING_SENTINEL || self.text == NUMBER_SENTINEL
            }
            _ => false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct TokenStream {
    pub source_id: String,
    pub tokens: Vec<Token>,
}

impl TokenStream {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn texts(&self) -> impl Iterator<Item = &str> {
        self.tokens.iter().map(|t| t.text.as_str())
    }
}

/// A source unit after normalization and tokenization, with its vulnerable
/// spans carried onto the normalized text.
#[derive(Debug, Clone)]
pub struct LexedUnit {
    pub normalized: Normalized,
    pub stream: TokenStream,
    pub spans: Vec<Span>,
}

impl LexedUnit {
    /// Characters `[span.start, span.end)` of the normalized text.
    pub fn slice(&self, span: Span) -> String {
        self.normalized.text.chars().skip(span.start).take(span.len()).collect()
    }
}

pub fn lex_unit(unit: &SourceUnit, options: &LexerOptions) -> LexedUnit {
    lex_source(&unit.id, &unit.source, &unit.vulnerable_spans, options)
}

pub fn lex_source(id: &str, source: &str, spans: &[Span], options: &LexerOptions) -> LexedUnit {
    let normalized = normalize(source, options);
    let stream = tokenize(&normalized.text, id, options);
    let spans = normalized.map_spans(spans);
    LexedUnit { normalized, stream, spans }
}
