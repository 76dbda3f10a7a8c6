//! Per-case concordance indicators and case classification.
//!
//! Four levels, each relaxing the previous one:
//!
//! 1. exact primary match: normalized primary labels are equal;
//! 2. similar primary match: primaries clear the similarity threshold
//!    without being equal (exact matches are excluded so a case contributes
//!    at most 1 to the adjusted rate);
//! 3. cross-category: one report's primary appears, exactly or similarly,
//!    in the other report's differential list;
//! 4. any-category match: some pair drawn from the two full consideration
//!    sets clears the threshold.
//!
//! Classification assigns each case to exactly one bucket by first-true
//! precedence: exact → similar → cross-category → differential-only →
//! divergent. The raw indicators stay independently reported.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::report::{diff_reports, CaseRecord, DiagnosticReport, DiffDecomposition};
use crate::similarity::SimilarityConfig;

/// One cross-report label pair that cleared the similarity threshold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchedPair {
    pub r0_label: String,
    pub r1_label: String,
    pub score: f64,
}

/// Mutually exclusive case bucket, assigned by first-true precedence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Classification {
    Exact,
    Similar,
    CrossCategory,
    DifferentialOnly,
    Divergent,
}

impl std::fmt::Display for Classification {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Classification::Exact => "exact",
            Classification::Similar => "similar",
            Classification::CrossCategory => "cross_category",
            Classification::DifferentialOnly => "differential_only",
            Classification::Divergent => "divergent",
        };
        f.write_str(s)
    }
}

/// Everything computed for one case.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseConcordance {
    pub case_id: String,
    pub physician_id: String,
    /// Level 1: exact primary match indicator.
    pub m_exact: bool,
    /// Level 2: similar-but-not-exact primary match indicator.
    pub m_similar: bool,
    /// Level 3: snapshot primary found in the final differentials.
    pub cc_p_to_d: bool,
    /// Level 3: final primary found in the snapshot differentials.
    pub cc_d_to_p: bool,
    /// Shared differential count under exact label equality.
    pub overlap: usize,
    /// Shared differential count under the similarity threshold. Diagnostic
    /// output only; the headline overlap statistics use exact equality.
    pub overlap_similar: usize,
    /// All consideration-set pairs clearing the threshold, sorted by labels.
    pub matched_pairs: Vec<MatchedPair>,
    /// Level 4: any-category match indicator (`matched_pairs` non-empty).
    pub acm: bool,
    pub classification: Classification,
    pub diff: DiffDecomposition,
}

/// 1 iff the normalized primary labels are equal.
pub fn exact_primary_match(r0: &DiagnosticReport, r1: &DiagnosticReport) -> bool {
    r0.primary().label() == r1.primary().label()
}

/// 1 iff the primaries are *not* equal but clear the similarity threshold.
/// The exclusion keeps a case's contribution to the adjusted rate in {0, 1}.
pub fn similar_primary_match(
    r0: &DiagnosticReport,
    r1: &DiagnosticReport,
    cfg: &SimilarityConfig,
) -> bool {
    !exact_primary_match(r0, r1)
        && cfg.is_similar(r0.primary().label(), r1.primary().label())
}

/// `|D0 ∩ D1|` under exact normalized-label equality.
pub fn differential_overlap(r0: &DiagnosticReport, r1: &DiagnosticReport) -> usize {
    let d1: std::collections::BTreeSet<&str> = r1.differential_labels().collect();
    r0.differential_labels()
        .filter(|label| d1.contains(label))
        .count()
}

/// Similarity-threshold variant of the overlap count: snapshot differentials
/// with at least one similar counterpart among the final differentials.
pub fn differential_overlap_similar(
    r0: &DiagnosticReport,
    r1: &DiagnosticReport,
    cfg: &SimilarityConfig,
) -> usize {
    let d1: Vec<&str> = r1.differential_labels().collect();
    r0.differential_labels()
        .filter(|a| d1.iter().any(|b| label_match(a, b, cfg)))
        .count()
}

/// 1 iff the snapshot primary appears in the final differentials, exactly or
/// at similarity >= tau.
pub fn cross_category_p_to_d(
    r0: &DiagnosticReport,
    r1: &DiagnosticReport,
    cfg: &SimilarityConfig,
) -> bool {
    let p0 = r0.primary().label();
    r1.differential_labels().any(|d| label_match(p0, d, cfg))
}

/// Mirror image: 1 iff the final primary appears in the snapshot
/// differentials, exactly or at similarity >= tau.
pub fn cross_category_d_to_p(
    r0: &DiagnosticReport,
    r1: &DiagnosticReport,
    cfg: &SimilarityConfig,
) -> bool {
    let p1 = r1.primary().label();
    r0.differential_labels().any(|d| label_match(p1, d, cfg))
}

/// All pairs from the two consideration sets with similarity >= tau, each
/// annotated with its score. Exact label equality scores exactly 1.
pub fn matched_pairs(
    r0: &DiagnosticReport,
    r1: &DiagnosticReport,
    cfg: &SimilarityConfig,
) -> Vec<MatchedPair> {
    let mut pairs = Vec::new();
    for a in r0.consideration_set() {
        for b in r1.consideration_set() {
            let score = if a == b { 1.0 } else { cfg.similarity(a, b) };
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

fn label_match(a: &str, b: &str, cfg: &SimilarityConfig) -> bool {
    a == b || cfg.is_similar(a, b)
}

/// Computes every indicator for one case and assigns its classification.
pub fn analyze_case(case: &CaseRecord, cfg: &SimilarityConfig) -> CaseConcordance {
    let r0 = &case.r0;
    let r1 = &case.r1;

    let m_exact = exact_primary_match(r0, r1);
    let m_similar = similar_primary_match(r0, r1, cfg);
    let cc_p_to_d = cross_category_p_to_d(r0, r1, cfg);
    let cc_d_to_p = cross_category_d_to_p(r0, r1, cfg);
    let overlap = differential_overlap(r0, r1);
    let overlap_similar = differential_overlap_similar(r0, r1, cfg);
    let pairs = matched_pairs(r0, r1, cfg);
    let acm = !pairs.is_empty();

    let classification = if m_exact {
        Classification::Exact
    } else if m_similar {
        Classification::Similar
    } else if cc_p_to_d || cc_d_to_p {
        Classification::CrossCategory
    } else if acm {
        Classification::DifferentialOnly
    } else {
        Classification::Divergent
    };

    CaseConcordance {
        case_id: case.case_id.clone(),
        physician_id: case.physician_id.clone(),
        m_exact,
        m_similar,
        cc_p_to_d,
        cc_d_to_p,
        overlap,
        overlap_similar,
        matched_pairs: pairs,
        acm,
        classification,
        diff: diff_reports(r0, r1),
    }
}

/// Analyzes a whole cohort in parallel and returns the results sorted by
/// case id, so downstream aggregation and exports are deterministic.
pub fn analyze_cohort(cases: &[CaseRecord], cfg: &SimilarityConfig) -> Vec<CaseConcordance> {
    let mut results: Vec<CaseConcordance> = cases
        .par_iter()
        .map(|case| analyze_case(case, cfg))
        .collect();
    results.sort_by(|a, b| a.case_id.cmp(&b.case_id));
    results
}
