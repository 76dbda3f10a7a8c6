//! Test-support utilities: brute-force oracles kept deliberately independent
//! of the production code paths they check, plus fixture access.
//!
//! Enabled through the `testkit` feature; nothing here is part of the
//! regular API surface.

use crate::concordance::MatchedPair;
use crate::report::DiagnosticReport;
use crate::similarity::SimilarityConfig;

/// The bundled 21-case demonstration cohort, in the case-file schema.
pub const DEMO_COHORT_JSON: &str = include_str!("../fixtures/demo_cohort.json");

/// Brute-force matching-blocks similarity. Orients the pair canonically
/// (lexicographically smaller string first), finds the longest common
/// substring by direct prefix scanning over every start pair (ties toward
/// the earliest start in the first string, then in the second), recurses on
/// both flanks, and scores `2M / (|a| + |b|)`. Same contract as the
/// production implementation, none of its machinery.
pub fn oracle_similarity(a: &str, b: &str) -> f64 {
    let (first, second) = if a <= b { (a, b) } else { (b, a) };
    let a_chars: Vec<char> = first.chars().collect();
    let b_chars: Vec<char> = second.chars().collect();
    let total = a_chars.len() + b_chars.len();
    if total == 0 {
        return 1.0;
    }
    (2 * oracle_matching_chars(&a_chars, &b_chars)) as f64 / total as f64
}

/// Total matched character count of the brute-force decomposition.
pub fn oracle_matching_chars(a: &[char], b: &[char]) -> usize {
    if a.is_empty() || b.is_empty() {
        return 0;
    }
    let (start_a, start_b, size) = brute_longest_block(a, b);
    if size == 0 {
        return 0;
    }
    size + oracle_matching_chars(&a[..start_a], &b[..start_b])
        + oracle_matching_chars(&a[start_a + size..], &b[start_b + size..])
}

fn brute_longest_block(a: &[char], b: &[char]) -> (usize, usize, usize) {
    let mut best = (0, 0, 0);
    for i in 0..a.len() {
        for j in 0..b.len() {
            let mut k = 0;
            while i + k < a.len() && j + k < b.len() && a[i + k] == b[j + k] {
                k += 1;
            }
            if k > best.2 {
                best = (i, j, k);
            }
        }
    }
    best
}

/// Exhaustive matched-pair scan over the two consideration sets, scored with
/// the *oracle* similarity when the configured algorithm is the default, and
/// with a direct reevaluation otherwise.
pub fn oracle_matched_pairs(
    r0: &DiagnosticReport,
    r1: &DiagnosticReport,
    cfg: &SimilarityConfig,
) -> Vec<MatchedPair> {
    let mut pairs = Vec::new();
    for a in r0.consideration_set() {
        for b in r1.consideration_set() {
            let score = if a == b {
                1.0
            } else {
                match cfg.algorithm {
                    crate::similarity::SimilarityAlgorithm::RatcliffObershelp => {
                        oracle_similarity(a, b)
                    }
                    crate::similarity::SimilarityAlgorithm::LevenshteinNormalized => {
                        crate::similarity::levenshtein_normalized(a, b)
                    }
                }
            };
            if score >= cfg.tau {
                pairs.push(MatchedPair {
                    r0_label: a.to_owned(),
                    r1_label: b.to_owned(),
                    score,
                });
            }
        }
    }
    pairs.sort_by(|x, y| {
        (x.r0_label.as_str(), x.r1_label.as_str()).cmp(&(y.r0_label.as_str(), y.r1_label.as_str()))
    });
    pairs
}

/// Every string of the given maximum length over the alphabet, shortest
/// first. Includes the empty string.
pub fn enumerate_strings(alphabet: &[char], max_len: usize) -> Vec<String> {
    let mut out = vec![String::new()];
    let mut frontier = vec![String::new()];
    for _ in 0..max_len {
        let mut next = Vec::with_capacity(frontier.len() * alphabet.len());
        for prefix in &frontier {
            for &c in alphabet {
                let mut s = prefix.clone();
                s.push(c);
                next.push(s);
            }
        }
        out.extend(next.iter().cloned());
        frontier = next;
    }
    out
}
