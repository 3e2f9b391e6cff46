//! Labeled source units and vulnerable-span arithmetic.
//!
//! All offsets are Unicode code-point indices into the owning text, never
//! byte offsets.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::category::VulnerabilityCategory;
use crate::error::{Error, Result};

/// Default number of characters of surrounding code attached to each
/// changed region.
pub const DEFAULT_CONTEXT_CHARS: usize = 200;

/// Half-open character range `[start, end)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(from = "[usize; 2]", into = "[usize; 2]")]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

impl Span {
    pub const fn new(start: usize, end: usize) -> Self {
        Span { start, end }
    }

    pub fn len(&self) -> usize {
        self.end.saturating_sub(self.start)
    }

    pub fn is_empty(&self) -> bool {
        self.end <= self.start
    }

    pub fn intersects(&self, other: &Span) -> bool {
        self.start < other.end && other.start < self.end
    }
}

impl From<[usize; 2]> for Span {
    fn from([start, end]: [usize; 2]) -> Self {
        Span { start, end }
    }
}

impl From<Span> for [usize; 2] {
    fn from(s: Span) -> Self {
        [s.start, s.end]
    }
}

/// One labeled code sample. An empty span list marks a clean sample.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourceUnit {
    pub id: String,
    pub category: VulnerabilityCategory,
    pub source: String,
    pub vulnerable_spans: Vec<Span>,
    #[serde(default)]
    pub origin: String,
}

impl SourceUnit {
    /// Checks that spans are non-empty, sorted, disjoint and inside the source.
    pub fn validate(&self) -> Result<()> {
        let len = self.source.chars().count();
        validate_spans(&self.vulnerable_spans, len, false).map_err(|reason| Error::InvalidSpans {
            id: self.id.clone(),
            reason,
        })
    }

    pub fn is_vulnerable(&self) -> bool {
        !self.vulnerable_spans.is_empty()
    }
}

fn validate_spans(spans: &[Span], len: usize, allow_empty: bool) -> core::result::Result<(), String> {
    let mut prev_end = 0usize;
    for (i, s) in spans.iter().enumerate() {
        if s.start > s.end || (!allow_empty && s.start == s.end) {
            return Err(format!("span {i} [{}, {}) is empty or inverted", s.start, s.end));
        }
        if s.end > len {
            return Err(format!("span {i} [{}, {}) exceeds source length {len}", s.start, s.end));
        }
        if i > 0 && s.start < prev_end {
            return Err(format!("span {i} [{}, {}) overlaps or precedes its predecessor", s.start, s.end));
        }
        prev_end = s.end;
    }
    Ok(())
}

/// Character ranges changed by a fix, on the pre-fix and post-fix side.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Hunk {
    pub before: Span,
    pub after: Span,
}

/// Pre-fix and post-fix versions of one file from a security-fix commit.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PatchPair {
    pub before: String,
    pub after: String,
    pub hunks: Vec<Hunk>,
}

impl PatchPair {
    pub fn validate(&self) -> Result<()> {
        let before: Vec<Span> = self.hunks.iter().map(|h| h.before).collect();
        let after: Vec<Span> = self.hunks.iter().map(|h| h.after).collect();
        validate_spans(&before, self.before.chars().count(), true)
            .map_err(|r| Error::InvalidPatch(format!("before side: {r}")))?;
        validate_spans(&after, self.after.chars().count(), true)
            .map_err(|r| Error::InvalidPatch(format!("after side: {r}")))
    }
}

/// Marks each changed pre-fix region as vulnerable, widened by
/// `context_chars` on both sides, clamped to the text and merged.
///
/// Pure insertions (empty before-ranges) only contribute when the context
/// makes them non-empty.
pub fn spans_from_patch(pair: &PatchPair, context_chars: usize) -> Result<Vec<Span>> {
    pair.validate()?;
    let len = pair.before.chars().count();
    let expanded = pair.hunks.iter().map(|h| {
        Span::new(
            h.before.start.saturating_sub(context_chars),
            h.before.end.saturating_add(context_chars).min(len),
        )
    });
    Ok(merge_spans(expanded))
}

/// Sorts, drops empty ranges and merges overlapping or touching ones.
pub fn merge_spans(spans: impl IntoIterator<Item = Span>) -> Vec<Span> {
    let mut spans: Vec<Span> = spans.into_iter().filter(|s| !s.is_empty()).collect();
    spans.sort_unstable();
    let mut out: Vec<Span> = Vec::with_capacity(spans.len());
    for s in spans {
        match out.last_mut() {
            Some(last) if s.start <= last.end => last.end = last.end.max(s.end),
            _ => out.push(s),
        }
    }
    out
}

/// Total number of characters covered by a disjoint span list.
pub fn covered_len(spans: &[Span]) -> usize {
    spans.iter().map(Span::len).sum()
}

/// Builds a `SourceUnit` from a patch pair, labeling the pre-fix text.
pub fn unit_from_patch(
    id: &str,
    category: VulnerabilityCategory,
    pair: &PatchPair,
    context_chars: usize,
    origin: &str,
) -> Result<SourceUnit> {
    let spans = spans_from_patch(pair, context_chars)?;
    Ok(SourceUnit {
        id: id.to_string(),
        category,
        source: pair.before.clone(),
        vulnerable_spans: spans,
        origin: origin.to_string(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use proptest::prelude::*;

    fn pair(len: usize, hunks: &[(usize, usize)]) -> PatchPair {
        PatchPair {
            before: "x".repeat(len),
            after: "y".repeat(len),
            hunks: hunks
                .iter()
                .map(|&(s, e)| Hunk { before: Span::new(s, e), after: Span::new(s, s) })
                .collect(),
        }
    }

    #[test]
    fn zero_context_is_identity() {
        let spans = spans_from_patch(&pair(100, &[(10, 20)]), 0).unwrap();
        assert_eq!(spans, vec![Span::new(10, 20)]);
    }

    #[test]
    fn expansion_merges_neighbours() {
        let spans = spans_from_patch(&pair(100, &[(10, 20), (25, 30)]), 5).unwrap();
        assert_eq!(spans, vec![Span::new(5, 35)]);
    }

    #[test]
    fn expansion_clamps_to_text() {
        let spans = spans_from_patch(&pair(30, &[(0, 4)]), 50).unwrap();
        assert_eq!(spans, vec![Span::new(0, 30)]);
    }

    #[test]
    fn hunks_outside_before_text_are_rejected() {
        assert!(matches!(
            spans_from_patch(&pair(10, &[(5, 11)]), 0),
            Err(Error::InvalidPatch(_))
        ));
        assert!(spans_from_patch(&pair(10, &[(5, 8), (6, 9)]), 0).is_err());
    }

    #[test]
    fn insertion_hunk_needs_context_to_count() {
        assert!(spans_from_patch(&pair(10, &[(4, 4)]), 0).unwrap().is_empty());
        assert_eq!(spans_from_patch(&pair(10, &[(4, 4)]), 2).unwrap(), vec![Span::new(2, 6)]);
    }

    #[test]
    fn unit_validation_counts_code_points() {
        let mut unit = SourceUnit {
            id: "u1".into(),
            category: VulnerabilityCategory::Xss,
            source: "héllo".into(),
            vulnerable_spans: vec![Span::new(0, 5)],
            origin: String::new(),
        };
        unit.validate().unwrap();
        unit.vulnerable_spans = vec![Span::new(0, 6)];
        match unit.validate() {
            Err(Error::InvalidSpans { id, .. }) => assert_eq!(id, "u1"),
            other => panic!("unexpected {other:?}"),
        }
        unit.vulnerable_spans = vec![Span::new(3, 5), Span::new(0, 2)];
        assert!(unit.validate().is_err());
    }

    fn arb_hunks() -> impl Strategy<Value = (usize, Vec<(usize, usize)>)> {
        (1usize..400).prop_flat_map(|len| {
            (Just(len), proptest::collection::vec((0..len, 0usize..30), 0..8))
        })
        .prop_map(|(len, raw)| {
            let mut starts: Vec<(usize, usize)> = raw;
            starts.sort_unstable();
            let mut hunks = Vec::new();
            let mut cursor = 0;
            for (s, w) in starts {
                let s = s.max(cursor);
                if s >= len {
                    break;
                }
                let e = (s + w).min(len);
                hunks.push((s, e));
                cursor = e;
            }
            (len, hunks)
        })
    }

    proptest! {
        #[test]
        fn spans_are_sorted_disjoint_and_monotone((len, hunks) in arb_hunks(), a in 0usize..60, b in 0usize..60) {
            let p = pair(len, &hunks);
            let (small, large) = (a.min(b), a.max(b));
            let s_small = spans_from_patch(&p, small).unwrap();
            let s_large = spans_from_patch(&p, large).unwrap();
            for w in s_small.windows(2) {
                prop_assert!(w[0].end < w[1].start);
            }
            prop_assert!(s_small.iter().all(|s| s.end <= len && !s.is_empty()));
            // every character covered at the smaller context stays covered
            for s in &s_small {
                prop_assert!(s_large.iter().any(|l| l.start <= s.start && s.end <= l.end));
            }
            prop_assert!(covered_len(&s_large) >= covered_len(&s_small));
            // zero context is idempotent: re-deriving from its own output changes nothing
            let again = pair(len, &s_small.iter().map(|s| (s.start, s.end)).collect::<Vec<_>>());
            let zero = spans_from_patch(&p, 0).unwrap();
            let zero_again = spans_from_patch(
                &pair(len, &zero.iter().map(|s| (s.start, s.end)).collect::<Vec<_>>()), 0).unwrap();
            prop_assert_eq!(zero, zero_again);
            prop_assert_eq!(spans_from_patch(&again, 0).unwrap(), s_small);
        }
    }
}
