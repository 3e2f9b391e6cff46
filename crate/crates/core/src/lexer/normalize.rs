use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use super::scan::{scan, SegmentKind};
use super::LexerOptions;
use crate::corpus::{merge_spans, Span};

/// Normalized text plus, for every kept character, its index in the
/// original text.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Normalized {
    pub text: String,
    origin: Vec<usize>,
    original_len: usize,
}

impl Normalized {
    /// Identity normalization (nothing removed).
    pub fn identity(source: &str) -> Self {
        let n = source.chars().count();
        Normalized { text: source.into(), origin: (0..n).collect(), original_len: n }
    }

    pub fn char_len(&self) -> usize {
        self.origin.len()
    }

    /// Original index of normalized character `i`.
    pub fn origin_of(&self, i: usize) -> usize {
        self.origin[i]
    }

    /// Maps a range of the original text onto the normalized text. Removed
    /// characters shrink the range; a range that was removed entirely maps
    /// to an empty span.
    pub fn map_span(&self, span: Span) -> Span {
        let start = self.origin.partition_point(|&o| o < span.start);
        let end = self.origin.partition_point(|&o| o < span.end);
        Span::new(start, end.max(start))
    }

    /// Maps a list of original-text spans, dropping those that vanish.
    pub fn map_spans(&self, spans: &[Span]) -> Vec<Span> {
        merge_spans(spans.iter().map(|s| self.map_span(*s)))
    }

    /// Maps a normalized range back to the smallest covering original range.
    pub fn original_span(&self, span: Span) -> Span {
        if span.is_empty() {
            let at = self.origin.get(span.start).copied().unwrap_or(self.original_len);
            return Span::new(at, at);
        }
        Span::new(self.origin[span.start], self.origin[span.end - 1] + 1)
    }
}

/// Removes comments and docstrings, strips trailing whitespace and drops
/// blank lines, keeping an offset map back to `source`.
///
/// Invalid code is handled best-effort; nothing here fails.
pub fn normalize(source: &str, options: &LexerOptions) -> Normalized {
    let chars: Vec<char> = source.chars().collect();
    let n = chars.len();
    let segments = scan(&chars);
    let mut keep = vec![true; n];
    // newline characters that end a logical line
    let mut line_break = vec![false; n];

    let mut depth: usize = 0;
    let mut line_has_code = false;
    let mut pending_doc: Option<usize> = None; // segment index of a candidate docstring
    let mut docstrings = Vec::new();

    for (si, seg) in segments.iter().enumerate() {
        match seg.kind {
            SegmentKind::Comment => {}
            SegmentKind::Str => {
                if pending_doc.take().is_some() {
                    // implicit concatenation: keep both
                    continue;
                }
                if !line_has_code && depth == 0 {
                    pending_doc = Some(si);
                }
                line_has_code = true;
            }
            SegmentKind::Code => {
                for i in seg.start..seg.end {
                    let c = chars[i];
                    match c {
                        '\n' => {
                            // a backslash inside a comment does not continue the line
                            let continued = i > seg.start && chars[i - 1] == '\\';
                            if depth == 0 && !continued {
                                line_break[i] = true;
                                if let Some(d) = pending_doc.take() {
                                    docstrings.push(d);
                                }
                                line_has_code = false;
                            }
                        }
                        c if c.is_whitespace() => {}
                        _ => {
                            // code after the string: not a docstring
                            pending_doc = None;
                            match c {
                                '(' | '[' | '{' => depth += 1,
                                ')' | ']' | '}' => depth = depth.saturating_sub(1),
                                _ => {}
                            }
                            line_has_code = true;
                        }
                    }
                }
            }
        }
    }
    if let Some(d) = pending_doc {
        docstrings.push(d);
    }

    if options.strip_comments {
        for seg in &segments {
            if seg.kind == SegmentKind::Comment {
                keep[seg.start..seg.end].iter_mut().for_each(|k| *k = false);
            }
        }
        for &d in &docstrings {
            let seg = segments[d];
            keep[seg.start..seg.end].iter_mut().for_each(|k| *k = false);
        }
    }

    // Per logical line: drop blank lines whole, else trim trailing whitespace.
    let mut line_start = 0;
    let mut i = 0;
    while i <= n {
        if i == n || line_break[i] {
            let last_content = (line_start..i)
                .rev()
                .find(|&j| keep[j] && !chars[j].is_whitespace());
            match last_content {
                None => {
                    keep[line_start..i].iter_mut().for_each(|k| *k = false);
                    if i < n {
                        keep[i] = false;
                    }
                }
                // a trailing backslash would turn the kept newline into a continuation
                Some(last) if chars[last] == '\\' => {}
                Some(last) => {
                    for k in keep.iter_mut().take(i).skip(last + 1) {
                        *k = false;
                    }
                }
            }
            line_start = i + 1;
        }
        i += 1;
    }

    let mut text = String::with_capacity(n);
    let mut origin = Vec::with_capacity(n);
    for (idx, &c) in chars.iter().enumerate() {
        if keep[idx] {
            text.push(c);
            origin.push(idx);
        }
    }
    Normalized { text, origin, original_len: n }
}
