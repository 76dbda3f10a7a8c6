//! Label normalization and bounded string similarity.
//!
//! All diagnostic comparisons in this crate run on *normalized labels*:
//! lowercase, whitespace-collapsed, NFC-composed text. Raw strings never
//! reach the similarity functions.
//!
//! The default similarity is Ratcliff–Obershelp: the total character count
//! of the recursive longest-common-substring decomposition `M`, scored as
//! `S = 2M / (|a| + |b|)`. Ties between equally long common substrings are
//! broken toward the earliest start in the first string, then the earliest
//! start in the second, which makes the decomposition fully deterministic.
//! Because that greedy tie-break depends on which string comes first, the
//! pair is canonically oriented (lexicographically smaller string first)
//! before decomposing, so `S(a, b) = S(b, a)` holds for every pair. A
//! normalized Levenshtein variant is selectable through
//! [`SimilarityConfig`].

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;
use unicode_normalization::UnicodeNormalization;

/// Default similarity threshold τ.
pub const DEFAULT_TAU: f64 = 0.60;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LabelError {
    /// The input was empty or whitespace-only.
    #[error("diagnosis label is empty after normalization")]
    EmptyLabel,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("similarity threshold tau must lie in [0, 1], got {0}")]
    TauOutOfRange(f64),
}

/// Which string-similarity algorithm backs `S(a, b)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SimilarityAlgorithm {
    /// Matching-blocks similarity `2M / (|a| + |b|)` (the default).
    #[default]
    RatcliffObershelp,
    /// `1 - edit_distance / max(|a|, |b|)`.
    LevenshteinNormalized,
}

impl fmt::Display for SimilarityAlgorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SimilarityAlgorithm::RatcliffObershelp => write!(f, "ratcliff_obershelp"),
            SimilarityAlgorithm::LevenshteinNormalized => write!(f, "levenshtein_normalized"),
        }
    }
}

impl FromStr for SimilarityAlgorithm {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.replace('-', "_").as_str() {
            "ratcliff_obershelp" => Ok(SimilarityAlgorithm::RatcliffObershelp),
            "levenshtein_normalized" => Ok(SimilarityAlgorithm::LevenshteinNormalized),
            other => Err(format!(
                "unknown similarity algorithm `{other}` \
                 (expected `ratcliff_obershelp` or `levenshtein_normalized`)"
            )),
        }
    }
}

/// Threshold and algorithm selection for all similarity judgements.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimilarityConfig {
    pub tau: f64,
    pub algorithm: SimilarityAlgorithm,
}

impl Default for SimilarityConfig {
    fn default() -> Self {
        Self {
            tau: DEFAULT_TAU,
            algorithm: SimilarityAlgorithm::default(),
        }
    }
}

impl SimilarityConfig {
    pub fn new(tau: f64, algorithm: SimilarityAlgorithm) -> Result<Self, ConfigError> {
        if !(0.0..=1.0).contains(&tau) || tau.is_nan() {
            return Err(ConfigError::TauOutOfRange(tau));
        }
        Ok(Self { tau, algorithm })
    }

    /// `S(a, b)` under the configured algorithm.
    pub fn similarity(&self, a: &str, b: &str) -> f64 {
        match self.algorithm {
            SimilarityAlgorithm::RatcliffObershelp => ratcliff_obershelp(a, b),
            SimilarityAlgorithm::LevenshteinNormalized => levenshtein_normalized(a, b),
        }
    }

    /// Threshold test: `S(a, b) >= tau`.
    pub fn is_similar(&self, a: &str, b: &str) -> bool {
        self.similarity(a, b) >= self.tau
    }
}

/// Normalize a raw diagnosis string into its canonical label form:
/// lowercase, trimmed, internal whitespace runs collapsed to single spaces,
/// Unicode composed (NFC).
pub fn normalize_label(raw: &str) -> Result<String, LabelError> {
    let collapsed = raw.split_whitespace().collect::<Vec<_>>().join(" ");
    let label: String = collapsed.to_lowercase().nfc().collect();
    if label.is_empty() {
        return Err(LabelError::EmptyLabel);
    }
    Ok(label)
}

/// `S(a, b)` under the default algorithm (Ratcliff–Obershelp).
pub fn similarity(a: &str, b: &str) -> f64 {
    ratcliff_obershelp(a, b)
}

/// Ratcliff–Obershelp matching-blocks similarity on Unicode scalar values.
///
/// Two empty strings score 1.0; otherwise `2M / (|a| + |b|)` where `M` is
/// [`matching_char_count`] over the canonically oriented pair.
pub fn ratcliff_obershelp(a: &str, b: &str) -> f64 {
    let (first, second) = if a <= b { (a, b) } else { (b, a) };
    let a_chars: Vec<char> = first.chars().collect();
    let b_chars: Vec<char> = second.chars().collect();
    let total = a_chars.len() + b_chars.len();
    if total == 0 {
        return 1.0;
    }
    let matched = matching_char_count(&a_chars, &b_chars);
    (2 * matched) as f64 / total as f64
}

/// Total matched character count `M` from the recursive decomposition:
/// find the longest common contiguous block, then recurse on the segments
/// to its left and to its right.
pub fn matching_char_count(a: &[char], b: &[char]) -> usize {
    // Positions of each character of b, ascending.
    let mut b_index: HashMap<char, Vec<usize>> = HashMap::new();
    for (j, &c) in b.iter().enumerate() {
        b_index.entry(c).or_default().push(j);
    }

    let mut total = 0;
    let mut pending = vec![(0usize, a.len(), 0usize, b.len())];
    while let Some((alo, ahi, blo, bhi)) = pending.pop() {
        if alo >= ahi || blo >= bhi {
            continue;
        }
        let (i, j, size) = longest_match(a, &b_index, alo, ahi, blo, bhi);
        if size == 0 {
            continue;
        }
        total += size;
        pending.push((alo, i, blo, j));
        pending.push((i + size, ahi, j + size, bhi));
    }
    total
}

/// Longest common contiguous block of `a[alo..ahi]` and `b[blo..bhi]`,
/// returned as `(start_in_a, start_in_b, length)`. Ties resolve to the
/// smallest `start_in_a`, then the smallest `start_in_b`.
fn longest_match(
    a: &[char],
    b_index: &HashMap<char, Vec<usize>>,
    alo: usize,
    ahi: usize,
    blo: usize,
    bhi: usize,
) -> (usize, usize, usize) {
    let mut best = (alo, blo, 0usize);
    // run_len[j] = length of the common block ending at a[i], b[j].
    let mut run_len: HashMap<usize, usize> = HashMap::new();
    for (i, &c) in a.iter().enumerate().take(ahi).skip(alo) {
        let mut next_run_len = HashMap::new();
        if let Some(positions) = b_index.get(&c) {
            for &j in positions {
                if j < blo {
                    continue;
                }
                if j >= bhi {
                    break;
                }
                let k = if j > blo {
                    run_len.get(&(j - 1)).copied().unwrap_or(0) + 1
                } else {
                    1
                };
                next_run_len.insert(j, k);
                if k > best.2 {
                    best = (i + 1 - k, j + 1 - k, k);
                }
            }
        }
        run_len = next_run_len;
    }
    best
}

/// Levenshtein edit distance on Unicode scalar values.
pub fn levenshtein(a: &str, b: &str) -> usize {
    let a_chars: Vec<char> = a.chars().collect();
    let b_chars: Vec<char> = b.chars().collect();
    if a_chars.is_empty() {
        return b_chars.len();
    }
    if b_chars.is_empty() {
        return a_chars.len();
    }

    let mut prev: Vec<usize> = (0..=b_chars.len()).collect();
    let mut curr = vec![0usize; b_chars.len() + 1];
    for (i, &ca) in a_chars.iter().enumerate() {
        curr[0] = i + 1;
        for (j, &cb) in b_chars.iter().enumerate() {
            let cost = usize::from(ca != cb);
            curr[j + 1] = (prev[j] + cost).min(prev[j + 1] + 1).min(curr[j] + 1);
        }
        std::mem::swap(&mut prev, &mut curr);
    }
    prev[b_chars.len()]
}

/// `1 - edit_distance / max(|a|, |b|)`; two empty strings score 1.0.
pub fn levenshtein_normalized(a: &str, b: &str) -> f64 {
    let max_len = a.chars().count().max(b.chars().count());
    if max_len == 0 {
        return 1.0;
    }
    1.0 - levenshtein(a, b) as f64 / max_len as f64
}
