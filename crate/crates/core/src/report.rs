//! Diagnostic reports, cases, and the replayable physician-correction
//! action log.
//!
//! A report pairs one primary diagnosis with an ordered list of differential
//! diagnoses. A case pairs the immutable AI snapshot report (`r0`) with the
//! physician-finalized report (`r1`), optionally carrying the action log
//! that transforms the former into the latter. All types are immutable
//! values; the operations here are pure functions, so cases can be processed
//! in parallel without shared state.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::similarity::{normalize_label, LabelError};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ReportError {
    #[error(transparent)]
    Label(#[from] LabelError),
    #[error("report invariant violated: {0}")]
    Invariant(String),
    #[error("action targets unknown label `{label}` in {slot} slot")]
    UnknownTarget { slot: Slot, label: String },
    #[error("add would duplicate label `{label}` in {slot} slot")]
    DuplicateAdd { slot: Slot, label: String },
    #[error("action sequence leaves the report without a primary diagnosis")]
    EmptyPrimary,
    #[error("{kind} action is missing its target_label")]
    MissingTarget { kind: ActionKind },
    #[error("{kind} action is missing its value")]
    MissingValue { kind: ActionKind },
    #[error("replaying the action log does not reproduce the stored final report: {0}")]
    ReplayMismatch(String),
}

/// Where a report came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReportSource {
    AiSnapshot,
    PhysicianFinal,
}

/// A single diagnosis: the string as authored plus its normalized label.
/// All comparisons anywhere in the crate use the label.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnosis {
    raw: String,
    label: String,
}

impl Diagnosis {
    pub fn new(raw: impl Into<String>) -> Result<Self, LabelError> {
        let raw = raw.into();
        let label = normalize_label(&raw)?;
        Ok(Self { raw, label })
    }

    pub fn raw(&self) -> &str {
        &self.raw
    }

    pub fn label(&self) -> &str {
        &self.label
    }
}

/// One structured report: primary diagnosis plus differential list.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DiagnosticReport {
    primary: Diagnosis,
    differentials: Vec<Diagnosis>,
    source: ReportSource,
}

impl DiagnosticReport {
    /// Builds a report, enforcing the structural invariants: the primary
    /// label must not appear among the differentials and differential
    /// labels must be pairwise distinct.
    pub fn new(
        primary: Diagnosis,
        differentials: Vec<Diagnosis>,
        source: ReportSource,
    ) -> Result<Self, ReportError> {
        let mut seen = BTreeSet::new();
        for d in &differentials {
            if d.label() == primary.label() {
                return Err(ReportError::Invariant(format!(
                    "primary diagnosis `{}` repeated in differentials",
                    primary.label()
                )));
            }
            if !seen.insert(d.label().to_owned()) {
                return Err(ReportError::Invariant(format!(
                    "duplicate differential label `{}`",
                    d.label()
                )));
            }
        }
        Ok(Self {
            primary,
            differentials,
            source,
        })
    }

    pub fn primary(&self) -> &Diagnosis {
        &self.primary
    }

    pub fn differentials(&self) -> &[Diagnosis] {
        &self.differentials
    }

    pub fn source(&self) -> ReportSource {
        self.source
    }

    /// Normalized differential labels, in order.
    pub fn differential_labels(&self) -> impl Iterator<Item = &str> {
        self.differentials.iter().map(|d| d.label())
    }

    /// The full consideration set: primary label united with differential
    /// labels. Size is always `1 + |differentials|`.
    pub fn consideration_set(&self) -> BTreeSet<&str> {
        let mut set = BTreeSet::new();
        set.insert(self.primary.label());
        set.extend(self.differential_labels());
        set
    }

    /// Label-level equality: primary labels equal and differential label
    /// sequences equal. Raw strings and sources are ignored.
    pub fn labels_equal(&self, other: &DiagnosticReport) -> bool {
        self.primary.label() == other.primary.label()
            && self
                .differential_labels()
                .eq(other.differential_labels())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActionKind {
    Validate,
    Remove,
    Add,
    Refine,
}

impl std::fmt::Display for ActionKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            ActionKind::Validate => "validate",
            ActionKind::Remove => "remove",
            ActionKind::Add => "add",
            ActionKind::Refine => "refine",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Slot {
    Primary,
    Differential,
}

impl std::fmt::Display for Slot {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Slot::Primary => f.write_str("primary"),
            Slot::Differential => f.write_str("differential"),
        }
    }
}

/// One physician correction step. `target_label` is a normalized label and
/// is required for `remove`/`refine`; `value` is required for `add`/`refine`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationAction {
    pub kind: ActionKind,
    pub slot: Slot,
    pub target_label: Option<String>,
    pub value: Option<Diagnosis>,
}

impl ValidationAction {
    /// Marks the report (or one label of it) as reviewed; replay no-op.
    pub fn validate() -> Self {
        Self {
            kind: ActionKind::Validate,
            slot: Slot::Primary,
            target_label: None,
            value: None,
        }
    }

    pub fn remove(slot: Slot, target_label: impl Into<String>) -> Self {
        Self {
            kind: ActionKind::Remove,
            slot,
            target_label: Some(target_label.into()),
            value: None,
        }
    }

    pub fn add(slot: Slot, value: Diagnosis) -> Self {
        Self {
            kind: ActionKind::Add,
            slot,
            target_label: None,
            value: Some(value),
        }
    }

    pub fn refine(slot: Slot, target_label: impl Into<String>, value: Diagnosis) -> Self {
        Self {
            kind: ActionKind::Refine,
            slot,
            target_label: Some(target_label.into()),
            value: Some(value),
        }
    }
}

/// Replays an action log against a snapshot report and returns the resulting
/// report (source `physician_final`). The input report is never mutated.
///
/// Actions apply strictly in list order. `validate` is a no-op marker;
/// `remove` deletes its target; `add` inserts; `refine` replaces its target
/// in place. Per-action checks guard slot-local consistency (targets must
/// exist, adds must not duplicate within a slot); the full cross-slot
/// invariants are enforced on the finished report, so an intermediate state
/// may, for example, briefly hold the future primary in both slots while a
/// reprioritization is in flight.
pub fn apply_actions(
    r0: &DiagnosticReport,
    actions: &[ValidationAction],
) -> Result<DiagnosticReport, ReportError> {
    let mut primary: Option<Diagnosis> = Some(r0.primary.clone());
    let mut differentials: Vec<Diagnosis> = r0.differentials.clone();

    for action in actions {
        match action.kind {
            ActionKind::Validate => {}
            ActionKind::Remove => {
                let target = required_target(action)?;
                match action.slot {
                    Slot::Primary => match &primary {
                        Some(p) if p.label() == target => primary = None,
                        _ => {
                            return Err(ReportError::UnknownTarget {
                                slot: Slot::Primary,
                                label: target.to_owned(),
                            });
                        }
                    },
                    Slot::Differential => {
                        let pos = position_of(&differentials, target)?;
                        differentials.remove(pos);
                    }
                }
            }
            ActionKind::Add => {
                let value = required_value(action)?;
                match action.slot {
                    Slot::Primary => {
                        if let Some(existing) = &primary {
                            return Err(ReportError::DuplicateAdd {
                                slot: Slot::Primary,
                                label: existing.label().to_owned(),
                            });
                        }
                        primary = Some(value.clone());
                    }
                    Slot::Differential => {
                        if differentials.iter().any(|d| d.label() == value.label()) {
                            return Err(ReportError::DuplicateAdd {
                                slot: Slot::Differential,
                                label: value.label().to_owned(),
                            });
                        }
                        differentials.push(value.clone());
                    }
                }
            }
            ActionKind::Refine => {
                let target = required_target(action)?;
                let value = required_value(action)?;
                match action.slot {
                    Slot::Primary => match &primary {
                        Some(p) if p.label() == target => primary = Some(value.clone()),
                        _ => {
                            return Err(ReportError::UnknownTarget {
                                slot: Slot::Primary,
                                label: target.to_owned(),
                            })
                        }
                    },
                    Slot::Differential => {
                        let pos = position_of(&differentials, target)?;
                        if differentials
                            .iter()
                            .enumerate()
                            .any(|(i, d)| i != pos && d.label() == value.label())
                        {
                            return Err(ReportError::DuplicateAdd {
                                slot: Slot::Differential,
                                label: value.label().to_owned(),
                            });
                        }
                        differentials[pos] = value.clone();
                    }
                }
            }
        }
    }

    let primary = primary.ok_or(ReportError::EmptyPrimary)?;
    DiagnosticReport::new(primary, differentials, ReportSource::PhysicianFinal)
}

fn required_target(action: &ValidationAction) -> Result<&str, ReportError> {
    action
        .target_label
        .as_deref()
        .ok_or(ReportError::MissingTarget { kind: action.kind })
}

fn required_value(action: &ValidationAction) -> Result<&Diagnosis, ReportError> {
    action
        .value
        .as_ref()
        .ok_or(ReportError::MissingValue { kind: action.kind })
}

fn position_of(differentials: &[Diagnosis], target: &str) -> Result<usize, ReportError> {
    differentials
        .iter()
        .position(|d| d.label() == target)
        .ok_or_else(|| ReportError::UnknownTarget {
            slot: Slot::Differential,
            label: target.to_owned(),
        })
}

/// Partition of the differential labels of two reports into labels added by
/// the physician, labels removed, and labels kept. The primary diagnoses are
/// handled by the concordance level indicators, not here.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DiffDecomposition {
    pub additions: BTreeSet<String>,
    pub removals: BTreeSet<String>,
    pub unchanged: BTreeSet<String>,
}

/// Decomposes the differential-label change between two reports.
pub fn diff_reports(r0: &DiagnosticReport, r1: &DiagnosticReport) -> DiffDecomposition {
    let d0: BTreeSet<&str> = r0.differential_labels().collect();
    let d1: BTreeSet<&str> = r1.differential_labels().collect();
    DiffDecomposition {
        additions: d1.difference(&d0).map(|s| (*s).to_owned()).collect(),
        removals: d0.difference(&d1).map(|s| (*s).to_owned()).collect(),
        unchanged: d0.intersection(&d1).map(|s| (*s).to_owned()).collect(),
    }
}

/// One evaluation case: the immutable AI snapshot, the physician-finalized
/// report, and (optionally) the action log connecting them.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CaseRecord {
    pub case_id: String,
    pub physician_id: String,
    pub r0: DiagnosticReport,
    pub r1: DiagnosticReport,
    pub actions: Option<Vec<ValidationAction>>,
}

impl CaseRecord {
    /// Checks Φ-replay consistency: when an action log is present, replaying
    /// it on `r0` must reproduce `r1` label-for-label.
    pub fn validate_replay(&self) -> Result<(), ReportError> {
        let Some(actions) = &self.actions else {
            return Ok(());
        };
        let replayed = apply_actions(&self.r0, actions)?;
        if !replayed.labels_equal(&self.r1) {
            return Err(ReportError::ReplayMismatch(format!(
                "case `{}`: replay produced primary `{}` with differentials [{}], \
                 stored final has primary `{}` with differentials [{}]",
                self.case_id,
                replayed.primary().label(),
                replayed
                    .differential_labels()
                    .collect::<Vec<_>>()
                    .join(", "),
                self.r1.primary().label(),
                self.r1.differential_labels().collect::<Vec<_>>().join(", "),
            )));
        }
        Ok(())
    }
}
