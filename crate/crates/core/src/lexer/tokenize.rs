use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use super::scan::{scan, SegmentKind};
use super::{LexerOptions, Token, TokenKind, TokenStream};

pub const STRING_SENTINEL: &str = "strlit";
pub const NUMBER_SENTINEL: &str = "numlit";
pub const NEWLINE_MARKER: &str = "NEWLINE";
pub const INDENT_MARKER: &str = "INDENT";
pub const DEDENT_MARKER: &str = "DEDENT";

const OPERATORS: [&str; 47] = [
    "**=", "//=", ">>=", "<<=", "...", "->", ":=", "**", "//", "==", "!=", "<=", ">=", "<<", ">>",
    "+=", "-=", "*=", "/=", "%=", "&=", "|=", "^=", "@=", "+", "-", "*", "/", "%", "@", "&", "|",
    "^", "~", "<", ">", "(", ")", "[", "]", "{", "}", ",", ":", ".", ";", "=",
];

fn is_ident_start(c: char) -> bool {
    c == '_' || c.is_alphabetic()
}

fn is_ident_continue(c: char) -> bool {
    c == '_' || c.is_alphanumeric()
}

fn indent_width(chars: &[char]) -> usize {
    chars.iter().fold(0, |col, &c| if c == '\t' { (col / 8 + 1) * 8 } else { col + 1 })
}

fn number_end(chars: &[char], start: usize, end: usize) -> usize {
    let mut i = start;
    let at = |i: usize| if i < end { Some(chars[i]) } else { None };
    if at(i) == Some('0') && matches!(at(i + 1), Some('x' | 'X' | 'o' | 'O' | 'b' | 'B')) {
        i += 2;
        while matches!(at(i), Some(c) if c.is_ascii_hexdigit() || c == '_') {
            i += 1;
        }
        return i;
    }
    while matches!(at(i), Some(c) if c.is_ascii_digit() || c == '_') {
        i += 1;
    }
    if at(i) == Some('.') {
        i += 1;
        while matches!(at(i), Some(c) if c.is_ascii_digit() || c == '_') {
            i += 1;
        }
    }
    if matches!(at(i), Some('e' | 'E')) {
        let mut j = i + 1;
        if matches!(at(j), Some('+' | '-')) {
            j += 1;
        }
        if matches!(at(j), Some(c) if c.is_ascii_digit()) {
            i = j;
            while matches!(at(i), Some(c) if c.is_ascii_digit() || c == '_') {
                i += 1;
            }
        }
    }
    if matches!(at(i), Some('j' | 'J')) {
        i += 1;
    }
    i
}

struct Lexer<'a> {
    chars: &'a [char],
    options: &'a LexerOptions,
    tokens: Vec<Token>,
}

impl Lexer<'_> {
    fn push(&mut self, kind: TokenKind, start: usize, end: usize) {
        let text = match kind {
            TokenKind::Newline => NEWLINE_MARKER.to_string(),
            TokenKind::Indent => INDENT_MARKER.to_string(),
            TokenKind::Dedent => DEDENT_MARKER.to_string(),
            TokenKind::Str if self.options.literal_sentinels => STRING_SENTINEL.to_string(),
            TokenKind::Number if self.options.literal_sentinels => NUMBER_SENTINEL.to_string(),
            _ => self.chars[start..end].iter().collect::<String>(),
        };
        self.tokens.push(Token { text, start, end, kind });
    }

    /// Lexes plain code in `[start, end)` (no strings or comments inside).
    fn code(&mut self, start: usize, end: usize) {
        let chars = self.chars;
        let mut i = start;
        'outer: while i < end {
            let c = chars[i];
            if c.is_whitespace() {
                i += 1;
                continue;
            }
            if c.is_ascii_digit() || (c == '.' && i + 1 < end && chars[i + 1].is_ascii_digit()) {
                let j = number_end(chars, i, end);
                self.push(TokenKind::Number, i, j);
                i = j;
                continue;
            }
            if is_ident_start(c) {
                let mut j = i + 1;
                while j < end && is_ident_continue(chars[j]) {
                    j += 1;
                }
                self.push(TokenKind::Name, i, j);
                i = j;
                continue;
            }
            for op in OPERATORS {
                let len = op.len();
                if i + len <= end && op.chars().zip(&chars[i..i + len]).all(|(a, &b)| a == b) {
                    self.push(TokenKind::Op, i, i + len);
                    i += len;
                    continue 'outer;
                }
            }
            self.push(TokenKind::Other, i, i + 1);
            i += 1;
        }
    }
}

/// Tokenizes normalized source. Deterministic; never fails.
///
/// Logical line breaks become `NEWLINE` tokens covering the `\n`. A line
/// indented deeper than the enclosing block starts with an `INDENT` token
/// covering its leading whitespace; when a line closes one or more blocks,
/// the preceding line break is emitted as a single `DEDENT` instead of
/// `NEWLINE`, so every token spans at least one character.
pub fn tokenize(source: &str, source_id: &str, options: &LexerOptions) -> TokenStream {
    let chars: Vec<char> = source.chars().collect();
    let segments = scan(&chars);
    let mut lx = Lexer { chars: &chars, options, tokens: Vec::new() };

    let mut indents: Vec<usize> = vec![0];
    let mut depth: usize = 0;
    let mut at_line_start = true;

    for seg in &segments {
        match seg.kind {
            SegmentKind::Str => {
                if at_line_start && depth == 0 {
                    line_indent(&mut lx, &mut indents, seg.start);
                }
                at_line_start = false;
                lx.push(TokenKind::Str, seg.start, seg.end);
            }
            SegmentKind::Comment => {
                // kept only when comment stripping is disabled
                lx.push(TokenKind::Op, seg.start, seg.start + 1);
                comment_words(&mut lx, seg.start + 1, seg.end);
            }
            SegmentKind::Code => {
                let mut run_start = seg.start;
                let mut i = seg.start;
                while i < seg.end {
                    let c = chars[i];
                    if c == '\n' {
                        lx.code(run_start, i);
                        run_start = i + 1;
                        let continued = i > seg.start && chars[i - 1] == '\\';
                        if depth == 0 && !continued && !at_line_start {
                            lx.push(TokenKind::Newline, i, i + 1);
                            at_line_start = true;
                        }
                    } else if !c.is_whitespace() {
                        if at_line_start && depth == 0 {
                            lx.code(run_start, i);
                            run_start = i;
                            line_indent(&mut lx, &mut indents, i);
                        }
                        at_line_start = false;
                        match c {
                            '(' | '[' | '{' => depth += 1,
                            ')' | ']' | '}' => depth = depth.saturating_sub(1),
                            _ => {}
                        }
                    }
                    i += 1;
                }
                lx.code(run_start, seg.end);
            }
        }
    }

    TokenStream { source_id: source_id.to_string(), tokens: lx.tokens }
}

/// Handles indentation for the line whose first content character is at `pos`.
fn line_indent(lx: &mut Lexer<'_>, indents: &mut Vec<usize>, pos: usize) {
    let chars = lx.chars;
    let mut ls = pos;
    while ls > 0 && chars[ls - 1] != '\n' {
        ls -= 1;
    }
    let ws = &chars[ls..pos];
    if ws.iter().any(|c| !c.is_whitespace()) {
        // continuation of a logical line, not a new one
        return;
    }
    let col = indent_width(ws);
    let top = *indents.last().unwrap_or(&0);
    if col > top {
        indents.push(col);
        lx.push(TokenKind::Indent, ls, pos);
    } else if col < top {
        while indents.len() > 1 && *indents.last().unwrap() > col {
            indents.pop();
        }
        if let Some(last) = lx.tokens.last_mut() {
            if last.kind == TokenKind::Newline {
                last.kind = TokenKind::Dedent;
                last.text = DEDENT_MARKER.to_string();
            }
        }
    }
}

fn comment_words(lx: &mut Lexer<'_>, start: usize, end: usize) {
    let chars = lx.chars;
    let mut i = start;
    while i < end {
        let c = chars[i];
        if c.is_whitespace() {
            i += 1;
        } else if is_ident_continue(c) {
            let mut j = i + 1;
            while j < end && is_ident_continue(chars[j]) {
                j += 1;
            }
            lx.push(TokenKind::Name, i, j);
            i = j;
        } else {
            lx.push(TokenKind::Other, i, i + 1);
            i += 1;
        }
    }
}
