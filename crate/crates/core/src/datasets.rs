//! Sliding windows over token streams, their vectorization, and the
//! train/validation/test split.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::Span;
use crate::embeddings::EmbeddingBackend;
use crate::error::{Error, Result};
use crate::lexer::{LexedUnit, TokenStream};
use crate::math;
use crate::tensor::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WindowGeometry {
    /// Window length `L` in tokens.
    pub length: usize,
    /// Stride `S` between window starts.
    pub step: usize,
    /// Minimum fraction of vulnerable tokens for label 1.
    pub overlap_threshold: f64,
}

impl Default for WindowGeometry {
    fn default() -> Self {
        WindowGeometry { length: 40, step: 15, overlap_threshold: 0.3 }
    }
}

impl WindowGeometry {
    pub fn validate(&self) -> Result<()> {
        if self.length < 1 {
            return Err(Error::InvalidConfig("window length must be >= 1".into()));
        }
        if self.step < 1 || self.step > self.length {
            return Err(Error::InvalidConfig(format!("window step must be in 1..={}", self.length)));
        }
        if !(self.overlap_threshold > 0.0 && self.overlap_threshold <= 1.0) {
            return Err(Error::InvalidConfig("overlap_threshold must be in (0, 1]".into()));
        }
        Ok(())
    }
}

/// Anything carrying a binary label.
pub trait Labeled {
    fn label(&self) -> u8;
}

impl Labeled for u8 {
    fn label(&self) -> u8 {
        *self
    }
}

/// Any payload paired with its label.
impl<T> Labeled for (T, u8) {
    fn label(&self) -> u8 {
        self.1
    }
}

/// A fixed-length slice of one token stream.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Window {
    pub source_id: String,
    /// `[i, j)` token indices.
    pub token_range: (usize, usize),
    /// Characters of the normalized text covered by the tokens.
    pub char_range: Span,
    pub label: u8,
}

impl Labeled for Window {
    fn label(&self) -> u8 {
        self.label
    }
}

/// A window with its `L × dim` input matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VectorizedWindow {
    pub window: Window,
    pub matrix: Matrix,
    pub oov: usize,
    pub truncated: usize,
}

impl VectorizedWindow {
    /// Set when every row is zero (for skip-gram: the window was all OOV).
    pub fn is_all_zero(&self) -> bool {
        self.matrix.is_zero()
    }
}

impl Labeled for VectorizedWindow {
    fn label(&self) -> u8 {
        self.window.label
    }
}

fn vulnerable_flags(stream: &TokenStream, spans: &[Span]) -> Vec<bool> {
    let mut flags = Vec::with_capacity(stream.len());
    let mut s = 0;
    for t in &stream.tokens {
        while s < spans.len() && spans[s].end <= t.start {
            s += 1;
        }
        // spans are sorted and disjoint, so only spans[s..] can still intersect
        let hit = spans[s..].iter().take_while(|sp| sp.start < t.end).any(|sp| sp.intersects(&t.span()));
        flags.push(hit);
    }
    flags
}

/// Cuts `stream` into windows starting at `0, S, 2S, …` (every start below
/// the stream length, so the tail windows are partial). A window is
/// labeled 1 when the fraction of its tokens touching a vulnerable span is
/// at least the overlap threshold.
pub fn build_windows(stream: &TokenStream, spans: &[Span], geometry: &WindowGeometry) -> Result<Vec<Window>> {
    geometry.validate()?;
    let n = stream.len();
    if n == 0 {
        return Ok(Vec::new());
    }
    let flags = vulnerable_flags(stream, spans);
    let mut windows = Vec::new();
    let mut start = 0;
    while start < n {
        let end = (start + geometry.length).min(n);
        let hits = flags[start..end].iter().filter(|&&f| f).count();
        let fraction = hits as f64 / (end - start) as f64;
        windows.push(Window {
            source_id: stream.source_id.clone(),
            token_range: (start, end),
            char_range: Span::new(stream.tokens[start].start, stream.tokens[end - 1].end),
            label: u8::from(fraction >= geometry.overlap_threshold),
        });
        start += geometry.step;
    }
    Ok(windows)
}

/// Stacks per-token vectors into `length × dim` matrices, zero-padding
/// short windows and keeping the first `length` rows of longer outputs.
pub fn vectorize(
    windows: &[Window],
    unit: &LexedUnit,
    backend: &dyn EmbeddingBackend,
    length: usize,
) -> Result<Vec<VectorizedWindow>> {
    let dim = backend.dim();
    windows
        .iter()
        .map(|w| {
            let e = backend.embed_window(unit, w.token_range.0..w.token_range.1)?;
            if e.matrix.cols() != dim && e.matrix.rows() > 0 {
                return Err(Error::DimensionMismatch { expected: dim, found: e.matrix.cols() });
            }
            if !e.matrix.is_finite() {
                return Err(Error::NonFinite("window embedding"));
            }
            let rows = e.matrix.rows().min(length);
            let mut data = Vec::with_capacity(length * dim);
            data.extend_from_slice(&e.matrix.as_slice()[..rows * dim]);
            data.resize(length * dim, 0.0);
            Ok(VectorizedWindow {
                window: w.clone(),
                matrix: Matrix::from_vec(length, dim, data),
                oov: e.oov,
                truncated: e.truncated + (e.matrix.rows() - rows),
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SplitSpec {
    pub train_frac: f64,
    pub val_frac: f64,
    pub test_frac: f64,
    pub seed: u64,
    pub stratified: bool,
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec { train_frac: 0.70, val_frac: 0.15, test_frac: 0.15, seed: 0, stratified: true }
    }
}

impl SplitSpec {
    pub fn validate(&self) -> Result<()> {
        let fr = [self.train_frac, self.val_frac, self.test_frac];
        if fr.iter().any(|f| f.is_nan() || *f <= 0.0) {
            return Err(Error::InvalidConfig("split fractions must be positive".into()));
        }
        if (fr.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidConfig("split fractions must sum to 1".into()));
        }
        Ok(())
    }

    /// `(train, val, test)` sizes: train = ⌊N·train_frac⌋, val = ⌊N·val_frac⌋,
    /// test takes the remainder.
    pub fn sizes(&self, n: usize) -> (usize, usize, usize) {
        // the epsilon absorbs representation error such as 0.7 * 10 = 6.999…
        let floor = |f: f64| math::floor64(n as f64 * f + 1e-9) as usize;
        let train = floor(self.train_frac).min(n);
        let val = floor(self.val_frac).min(n - train);
        (train, val, n - train - val)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Split<T> {
    pub train: Vec<T>,
    pub val: Vec<T>,
    pub test: Vec<T>,
}

/// Per-class counts for each part, `[class][part]` with parts train/val/test.
/// Each count differs from its exact proportional share by less than one.
fn stratified_counts(n0: usize, n1: usize, sizes: (usize, usize, usize)) -> [[usize; 3]; 2] {
    let n = (n0 + n1) as f64;
    let (tr, va, _) = sizes;
    let q_tr = n0 as f64 * tr as f64 / n;
    let q_va = n0 as f64 * va as f64 / n;
    let tr0 = {
        let lo = math::floor64(q_tr);
        if q_tr - lo > 0.5 { lo + 1.0 } else { lo }
    } as usize;
    let d_tr = tr0 as f64 - q_tr;
    let va0 = if d_tr >= 0.0 { math::floor64(q_va) } else { math::ceil64(q_va) } as usize;
    let te0 = n0 - tr0 - va0;
    let tr1 = tr - tr0;
    let va1 = va - va0;
    [[tr0, va0, te0], [tr1, va1, n1 - tr1 - va1]]
}

/// Seeded partition into train/validation/test. Items keep their input
/// order within each part.
pub fn split<T: Labeled>(items: Vec<T>, spec: &SplitSpec) -> Result<Split<T>> {
    spec.validate()?;
    let n = items.len();
    let sizes = spec.sizes(n);
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut part_of = alloc::vec![0u8; n];

    if spec.stratified {
        let mut by_class: [Vec<usize>; 2] = [Vec::new(), Vec::new()];
        for (i, item) in items.iter().enumerate() {
            match item.label() {
                l @ (0 | 1) => by_class[l as usize].push(i),
                other => return Err(Error::NonBinaryLabel(other)),
            }
        }
        for (c, idx) in by_class.iter().enumerate() {
            if idx.is_empty() {
                return Err(Error::MissingClass(c as u8));
            }
        }
        let counts = stratified_counts(by_class[0].len(), by_class[1].len(), sizes);
        for (c, idx) in by_class.iter_mut().enumerate() {
            idx.shuffle(&mut rng);
            let [tr, va, _] = counts[c];
            for (k, &i) in idx.iter().enumerate() {
                part_of[i] = if k < tr { 0 } else if k < tr + va { 1 } else { 2 };
            }
        }
    } else {
        let mut idx: Vec<usize> = (0..n).collect();
        idx.shuffle(&mut rng);
        for (k, &i) in idx.iter().enumerate() {
            part_of[i] = if k < sizes.0 { 0 } else if k < sizes.0 + sizes.1 { 1 } else { 2 };
        }
    }

    let mut out = Split { train: Vec::with_capacity(sizes.0), val: Vec::with_capacity(sizes.1), test: Vec::with_capacity(sizes.2) };
    for (item, part) in items.into_iter().zip(part_of) {
        match part {
            0 => out.train.push(item),
            1 => out.val.push(item),
            _ => out.test.push(item),
        }
    }
    Ok(out)
}

/// Seeded stratified subsample of at most `n` items, in input order. The
/// positive share matches the input to within one item, and each class
/// present in the input keeps at least one item when `n >= 2`.
pub fn subsample<T: Labeled>(items: Vec<T>, n: usize, seed: u64) -> Result<Vec<T>> {
    let total = items.len();
    if n >= total {
        return Ok(items);
    }
    let mut by_class: [Vec<usize>; 2] = [Vec::new(), Vec::new()];
    for (i, item) in items.iter().enumerate() {
        match item.label() {
            l @ (0 | 1) => by_class[l as usize].push(i),
            other => return Err(Error::NonBinaryLabel(other)),
        }
    }
    let (n0, n1) = (by_class[0].len(), by_class[1].len());
    let share = n as f64 * n1 as f64 / total as f64;
    let mut take1 = math::floor64(share + 0.5) as usize;
    if n >= 2 {
        if n1 > 0 {
            take1 = take1.max(1);
        }
        if n0 > 0 {
            take1 = take1.min(n - 1);
        }
    }
    let take1 = take1.min(n1);
    let take0 = (n - take1).min(n0);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut keep = alloc::vec![false; total];
    for (idx, take) in by_class.iter_mut().zip([take0, take1]) {
        idx.shuffle(&mut rng);
        for &i in &idx[..take] {
            keep[i] = true;
        }
    }
    Ok(items.into_iter().zip(keep).filter_map(|(it, k)| k.then_some(it)).collect())
}

/// Balanced per-class loss multipliers `N / (2·N_c)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassWeights {
    pub weight_0: f64,
    pub weight_1: f64,
}

impl ClassWeights {
    pub fn of(&self, label: u8) -> f64 {
        if label == 0 { self.weight_0 } else { self.weight_1 }
    }
}

pub fn class_weights<L: Labeled>(labels: &[L]) -> Result<ClassWeights> {
    let mut counts = [0usize; 2];
    for l in labels {
        match l.label() {
            c @ (0 | 1) => counts[c as usize] += 1,
            other => return Err(Error::NonBinaryLabel(other)),
        }
    }
    match counts {
        [0, 0] => Err(Error::Empty("labels")),
        [_, 0] => Err(Error::SingleClass(0)),
        [0, _] => Err(Error::SingleClass(1)),
        [n0, n1] => {
            let n = (n0 + n1) as f64;
            Ok(ClassWeights { weight_0: n / (2.0 * n0 as f64), weight_1: n / (2.0 * n1 as f64) })
        }
    }
}

/// Total weight carried by each class: `(Σ w over class 0, Σ w over class 1)`.
pub fn weighted_mass<L: Labeled>(labels: &[L], weights: &ClassWeights) -> (f64, f64) {
    labels.iter().fold((0.0, 0.0), |(a, b), l| match l.label() {
        0 => (a + weights.weight_0, b),
        _ => (a, b + weights.weight_1),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::ToString;
    use alloc::vec;

    #[test]
    fn subsample_keeps_class_share_and_order() {
        let labels: Vec<u8> = (0..1000).map(|i| u8::from(i % 10 == 0)).collect();
        let items: Vec<(usize, u8)> = labels.iter().copied().enumerate().collect();
        let picked = subsample(items.clone(), 200, 3).unwrap();
        assert_eq!(picked.len(), 200);
        assert_eq!(picked.iter().filter(|p| p.1 == 1).count(), 20);
        assert!(picked.windows(2).all(|w| w[0].0 < w[1].0));
        assert_eq!(picked, subsample(items.clone(), 200, 3).unwrap());
        assert_ne!(picked, subsample(items.clone(), 200, 4).unwrap());
        assert_eq!(subsample(items.clone(), 5000, 3).unwrap().len(), 1000);
        // a rare class survives
        let rare: Vec<(usize, u8)> = (0..1000).map(|i| (i, u8::from(i == 7))).collect();
        assert_eq!(subsample(rare, 10, 0).unwrap().iter().filter(|p| p.1 == 1).count(), 1);
    }
    use proptest::prelude::*;

    use crate::lexer::{Token, TokenKind};

    /// Tokens of width 1 separated by one space: token `i` covers `[2i, 2i+1)`.
    fn stream(n: usize) -> TokenStream {
        TokenStream {
            source_id: "s".to_string(),
            tokens: (0..n)
                .map(|i| Token { text: "t".to_string(), start: 2 * i, end: 2 * i + 1, kind: TokenKind::Name })
                .collect(),
        }
    }

    fn geo(length: usize, step: usize, overlap_threshold: f64) -> WindowGeometry {
        WindowGeometry { length, step, overlap_threshold }
    }

    #[test]
    fn window_starts_and_clean_labels() {
        let w = build_windows(&stream(10), &[], &geo(4, 2, 0.3)).unwrap();
        let starts: Vec<usize> = w.iter().map(|w| w.token_range.0).collect();
        assert_eq!(starts, vec![0, 2, 4, 6, 8]);
        assert_eq!(w[4].token_range, (8, 10));
        assert!(w.iter().all(|w| w.label == 0));
    }

    #[test]
    fn fully_vulnerable_stream_labels_everything() {
        for thr in [0.01, 0.5, 1.0] {
            let w = build_windows(&stream(10), &[Span::new(0, 19)], &geo(4, 2, thr)).unwrap();
            assert!(w.iter().all(|w| w.label == 1));
        }
    }

    #[test]
    fn threshold_compares_vulnerable_fraction() {
        // token 1 of the single 4-token window is vulnerable
        let spans = [Span::new(2, 3)];
        assert_eq!(build_windows(&stream(4), &spans, &geo(4, 4, 0.5)).unwrap()[0].label, 0);
        assert_eq!(build_windows(&stream(4), &spans, &geo(4, 4, 0.25)).unwrap()[0].label, 1);
    }

    #[test]
    fn empty_stream_and_bad_geometry() {
        assert!(build_windows(&stream(0), &[], &geo(4, 2, 0.3)).unwrap().is_empty());
        assert!(build_windows(&stream(3), &[], &geo(4, 5, 0.3)).is_err());
        assert!(build_windows(&stream(3), &[], &geo(4, 2, 0.0)).is_err());
    }

    #[test]
    fn class_weight_examples() {
        let w = class_weights(&[vec![0u8; 500], vec![1u8; 500]].concat()).unwrap();
        assert_eq!((w.weight_0, w.weight_1), (1.0, 1.0));
        let w = class_weights(&[vec![0u8; 900], vec![1u8; 100]].concat()).unwrap();
        assert!((w.weight_0 - 0.5556).abs() < 1e-3 && (w.weight_1 - 5.0).abs() < 1e-3);
        let w = class_weights(&[0u8, 0, 1, 1]).unwrap();
        assert_eq!((w.weight_0, w.weight_1), (1.0, 1.0));
        assert!(matches!(class_weights(&[1u8, 1]), Err(Error::SingleClass(1))));
    }

    #[test]
    fn balanced_weights_equalize_class_mass() {
        let labels: Vec<u8> = (0..1000).map(|i| u8::from(i % 7 == 0)).collect();
        let w = class_weights(&labels).unwrap();
        let (m0, m1) = weighted_mass(&labels, &w);
        assert!((m0 - m1).abs() <= 1e-3 * m0);
    }

    #[test]
    fn split_sizes_follow_floor_rule() {
        let spec = SplitSpec::default();
        assert_eq!(spec.sizes(1000), (700, 150, 150));
        assert_eq!(spec.sizes(10), (7, 1, 2));
        let s = split(vec![0u8; 10], &SplitSpec { stratified: false, ..spec }).unwrap();
        assert_eq!((s.train.len(), s.val.len(), s.test.len()), (7, 1, 2));
        assert!(matches!(split(vec![0u8; 10], &spec), Err(Error::MissingClass(1))));
    }

    proptest! {
        #[test]
        fn labels_are_monotone_in_span_growth(
            n in 1usize..60, s in 0usize..120, w in 1usize..40, grow in 0usize..20,
            len in 1usize..12, step_frac in 0.01f64..1.0, thr in 0.01f64..1.0,
        ) {
            let step = ((len as f64 * step_frac).ceil() as usize).clamp(1, len);
            let g = geo(len, step, thr);
            let small = [Span::new(s, s + w)];
            let big = [Span::new(s.saturating_sub(grow), s + w + grow)];
            let a = build_windows(&stream(n), &small, &g).unwrap();
            let b = build_windows(&stream(n), &big, &g).unwrap();
            prop_assert_eq!(a.len(), b.len());
            for (x, y) in a.iter().zip(&b) {
                prop_assert!(x.label <= y.label);
            }
            // starts form an arithmetic progression and cover every token
            let mut covered = vec![false; n];
            for (k, win) in a.iter().enumerate() {
                prop_assert_eq!(win.token_range.0, k * step);
                prop_assert!(win.token_range.1 - win.token_range.0 <= len);
                covered[win.token_range.0..win.token_range.1].iter_mut().for_each(|c| *c = true);
            }
            prop_assert!(covered.iter().all(|&c| c));
        }

        #[test]
        fn stratified_split_is_a_balanced_partition(n0 in 1usize..400, n1 in 1usize..400, seed in any::<u64>()) {
            let items: Vec<(usize, u8)> = (0..n0 + n1).map(|i| (i, u8::from(i >= n0))).collect();
            struct It((usize, u8));
            impl Labeled for It { fn label(&self) -> u8 { self.0 .1 } }
            let spec = SplitSpec { seed, ..SplitSpec::default() };
            let s = split(items.into_iter().map(It).collect(), &spec).unwrap();
            let n = n0 + n1;
            let sizes = spec.sizes(n);
            prop_assert_eq!((s.train.len(), s.val.len(), s.test.len()), sizes);
            let mut seen = vec![false; n];
            let parts = [&s.train, &s.val, &s.test];
            for (p, part) in parts.iter().enumerate() {
                let pos = part.iter().filter(|i| i.label() == 1).count() as f64;
                let exact = n1 as f64 * [sizes.0, sizes.1, sizes.2][p] as f64 / n as f64;
                prop_assert!((pos - exact).abs() < 1.0);
                for it in part.iter() {
                    prop_assert!(!seen[it.0 .0]);
                    seen[it.0 .0] = true;
                }
            }
            prop_assert!(seen.iter().all(|&x| x));
        }
    }
}
