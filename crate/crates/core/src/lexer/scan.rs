//! Splits Python source into code, comment and string-literal segments.

use alloc::vec::Vec;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum SegmentKind {
    Code,
    Comment,
    Str,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct Segment {
    pub kind: SegmentKind,
    pub start: usize,
    pub end: usize,
}

fn is_ident_char(c: char) -> bool {
    c == '_' || c.is_alphanumeric()
}

/// Length of a string prefix (`r`, `b`, `f`, `u`, `rb`, `br`, `fr`, `rf`)
/// starting at `i` and immediately followed by a quote, or `None`.
fn string_prefix(chars: &[char], i: usize) -> Option<usize> {
    if i > 0 && is_ident_char(chars[i - 1]) {
        return None;
    }
    let is_prefix = |c: char| matches!(c.to_ascii_lowercase(), 'r' | 'b' | 'f' | 'u');
    let mut n = 0;
    while n < 2 && i + n < chars.len() && is_prefix(chars[i + n]) {
        n += 1;
    }
    if n > 0 && i + n < chars.len() && matches!(chars[i + n], '\'' | '"') {
        Some(n)
    } else {
        None
    }
}

/// End (exclusive) of the string literal whose opening quote is at `q`.
fn string_end(chars: &[char], q: usize) -> usize {
    let quote = chars[q];
    let triple = q + 2 < chars.len() && chars[q + 1] == quote && chars[q + 2] == quote;
    let mut i = if triple { q + 3 } else { q + 1 };
    while i < chars.len() {
        let c = chars[i];
        if c == '\\' {
            i += 2;
            continue;
        }
        if triple {
            if c == quote && chars.get(i + 1) == Some(&quote) && chars.get(i + 2) == Some(&quote) {
                return i + 3;
            }
        } else if c == quote {
            return i + 1;
        } else if c == '\n' {
            // unterminated single-line literal: stop before the newline
            return i;
        }
        i += 1;
    }
    chars.len()
}

pub(crate) fn scan(chars: &[char]) -> Vec<Segment> {
    let mut segments = Vec::new();
    let mut code_start = 0;
    let mut i = 0;
    let push_code = |segments: &mut Vec<Segment>, start: usize, end: usize| {
        if end > start {
            segments.push(Segment { kind: SegmentKind::Code, start, end });
        }
    };
    while i < chars.len() {
        let c = chars[i];
        if c == '#' {
            push_code(&mut segments, code_start, i);
            let mut j = i;
            while j < chars.len() && chars[j] != '\n' {
                j += 1;
            }
            segments.push(Segment { kind: SegmentKind::Comment, start: i, end: j });
            i = j;
            code_start = j;
            continue;
        }
        let quote_at = if c == '\'' || c == '"' {
            Some(i)
        } else {
            string_prefix(chars, i).map(|n| i + n)
        };
        if let Some(q) = quote_at {
            push_code(&mut segments, code_start, i);
            let end = string_end(chars, q).max(q + 1).min(chars.len());
            segments.push(Segment { kind: SegmentKind::Str, start: i, end });
            i = end;
            code_start = end;
            continue;
        }
        i += 1;
    }
    push_code(&mut segments, code_start, chars.len());
    segments
}
