//! Concordance analysis between immutable AI diagnostic snapshots and
//! physician-validated reports.
//!
//! The library compares pairs of structured diagnostic reports (a frozen AI
//! inference snapshot and the physician-finalized version of it) through a
//! four-level hierarchy (exact primary match, similarity-adjusted match,
//! cross-category reprioritization, any-category match) and aggregates the
//! per-case indicators into cohort rates with binomial confidence intervals
//! and per-physician strata.
//!
//! Modules:
//!
//! * [`report`]: reports, cases, and the replayable correction action log;
//! * [`similarity`]: label normalization and the bounded similarity `S`;
//! * [`concordance`]: per-case indicators and case classification;
//! * [`stats`]: cohort rates, confidence intervals, interpretation bands;
//! * [`ledger`]: the append-only, hash-chained snapshot ledger;
//! * [`store`]: case-file schema, validation, and cohort loading;
//! * [`synth`]: seeded synthetic cohorts and CI coverage studies;
//! * [`export`]: CSV/JSON/TSV artifacts and the rendered summary table.

pub mod canonical;
pub mod concordance;
pub mod export;
pub mod ledger;
pub mod report;
pub mod similarity;
pub mod stats;
pub mod store;
pub mod synth;

#[cfg(any(test, feature = "testkit"))]
pub mod testkit;

pub use concordance::{analyze_case, analyze_cohort, CaseConcordance, Classification};
pub use report::{CaseRecord, DiagnosticReport, Diagnosis};
pub use similarity::{SimilarityAlgorithm, SimilarityConfig};
pub use stats::{cohort_metrics, CohortMetrics};
