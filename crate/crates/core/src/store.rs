//! Case-file schema, validation, and cohort loading.
//!
//! The interchange format is a JSON array of case objects (or one object per
//! line):
//!
//! ```json
//! {
//!   "case_id": "case-01",
//!   "physician_id": "physician-1",
//!   "r0": { "primary": "Melanoma", "differentials": ["Dysplastic Nevus"] },
//!   "r1": { "primary": "melanoma", "differentials": ["dysplastic nevus"] },
//!   "actions": [ { "kind": "validate", "slot": "primary" } ]
//! }
//! ```
//!
//! Files and ledger payloads carry the strings exactly as authored;
//! normalization happens here at load time. Cohorts may equally be loaded
//! back out of a ledger, in which case the three records of each case are
//! reassembled into the same structure.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::canonical::{canonical_json, CanonicalError};
use crate::ledger::{read_records, LedgerError, LedgerRecord, RecordKind};
use crate::report::{
    apply_actions, ActionKind, CaseRecord, Diagnosis, DiagnosticReport, ReportError, ReportSource,
    Slot, ValidationAction,
};
use crate::similarity::normalize_label;

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("schema error{}: {detail}", fmt_case(.case_id))]
    Schema {
        case_id: Option<String>,
        detail: String,
    },
    #[error("invariant violated in case `{case_id}`: {detail}")]
    Invariant { case_id: String, detail: String },
    #[error("replay mismatch in case `{case_id}`: {detail}")]
    ReplayMismatch { case_id: String, detail: String },
    #[error(transparent)]
    Ledger(#[from] LedgerError),
    #[error(transparent)]
    Canonical(#[from] CanonicalError),
    #[error("I/O failure: {0}")]
    Io(#[from] std::io::Error),
}

fn fmt_case(case_id: &Option<String>) -> String {
    match case_id {
        Some(id) => format!(" in case `{id}`"),
        None => String::new(),
    }
}

/// A non-fatal finding collected during loading. In strict mode callers
/// promote warnings to errors.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Warning {
    pub case_id: Option<String>,
    pub message: String,
}

/// A case exactly as it appears on disk: raw strings, no normalization.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawCase {
    pub case_id: String,
    pub physician_id: String,
    pub r0: RawReport,
    pub r1: RawReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub actions: Option<Vec<RawAction>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawReport {
    pub primary: String,
    pub differentials: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawAction {
    pub kind: ActionKind,
    pub slot: Slot,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub target_label: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub value: Option<String>,
}

/// Fully validated cohort plus whatever warnings loading produced.
#[derive(Debug, Clone)]
pub struct LoadedCohort {
    pub cases: Vec<CaseRecord>,
    pub warnings: Vec<Warning>,
}

/// What kind of input a path points at.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InputKind {
    CaseFile,
    Ledger,
}

/// Sniffs ledger lines (which carry `content_hash`) apart from case files.
pub fn detect_input(text: &str) -> InputKind {
    let first_line = text.lines().find(|l| !l.trim().is_empty()).unwrap_or("");
    if let Ok(value) = serde_json::from_str::<serde_json::Value>(first_line) {
        if value.get("content_hash").is_some() && value.get("payload").is_some() {
            return InputKind::Ledger;
        }
    }
    InputKind::CaseFile
}

/// Parses a case file: either one JSON array of cases or one case per line.
pub fn parse_case_file(text: &str) -> Result<Vec<RawCase>, StoreError> {
    let trimmed = text.trim_start();
    if trimmed.starts_with('[') {
        return serde_json::from_str(text).map_err(|e| StoreError::Schema {
            case_id: None,
            detail: format!("invalid case array: {e}"),
        });
    }
    let mut cases = Vec::new();
    for (index, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let case: RawCase = serde_json::from_str(line).map_err(|e| StoreError::Schema {
            case_id: None,
            detail: format!("invalid case on line {}: {e}", index + 1),
        })?;
        cases.push(case);
    }
    Ok(cases)
}

/// Loads and fully validates a cohort from a case file or a ledger,
/// auto-detected from the content.
pub fn load_cohort(path: impl AsRef<Path>) -> Result<LoadedCohort, StoreError> {
    let text = std::fs::read_to_string(path.as_ref())?;
    let raw = match detect_input(&text) {
        InputKind::CaseFile => parse_case_file(&text)?,
        InputKind::Ledger => {
            let records = read_records(path.as_ref())?;
            cases_from_ledger_records(&records)?
        }
    };
    validate_cases(&raw)
}

/// Validates raw cases into domain records: labels are normalized, duplicate
/// differentials collapse with a warning, structural invariants are
/// enforced, and action logs must replay to the stored final report.
pub fn validate_cases(raw: &[RawCase]) -> Result<LoadedCohort, StoreError> {
    let mut warnings = Vec::new();
    let mut seen_ids = std::collections::BTreeSet::new();
    let mut cases = Vec::with_capacity(raw.len());
    for case in raw {
        if !seen_ids.insert(case.case_id.clone()) {
            return Err(StoreError::Invariant {
                case_id: case.case_id.clone(),
                detail: "duplicate case_id in cohort".to_owned(),
            });
        }
        cases.push(validate_case(case, &mut warnings)?);
    }
    Ok(LoadedCohort { cases, warnings })
}

fn validate_case(raw: &RawCase, warnings: &mut Vec<Warning>) -> Result<CaseRecord, StoreError> {
    let case_id = &raw.case_id;
    if case_id.trim().is_empty() {
        return Err(StoreError::Schema {
            case_id: None,
            detail: "case_id must be non-empty".to_owned(),
        });
    }
    let r0 = build_report(case_id, &raw.r0, ReportSource::AiSnapshot, warnings)?;
    let r1 = build_report(case_id, &raw.r1, ReportSource::PhysicianFinal, warnings)?;

    if r0.differentials().len() != 3 {
        warnings.push(Warning {
            case_id: Some(case_id.clone()),
            message: format!(
                "AI snapshot carries {} differentials (pipeline convention is 3)",
                r0.differentials().len()
            ),
        });
    }
    for (report, name) in [(&r0, "r0"), (&r1, "r1")] {
        if report.differentials().len() > 10 {
            warnings.push(Warning {
                case_id: Some(case_id.clone()),
                message: format!(
                    "{name} carries {} differentials, outside the expected 0-10 envelope",
                    report.differentials().len()
                ),
            });
        }
    }

    let actions = match &raw.actions {
        None => None,
        Some(raw_actions) => Some(
            raw_actions
                .iter()
                .map(|a| convert_action(case_id, a))
                .collect::<Result<Vec<_>, _>>()?,
        ),
    };

    let record = CaseRecord {
        case_id: case_id.clone(),
        physician_id: raw.physician_id.clone(),
        r0,
        r1,
        actions,
    };
    record.validate_replay().map_err(|e| match e {
        ReportError::ReplayMismatch(detail) => StoreError::ReplayMismatch {
            case_id: case_id.clone(),
            detail,
        },
        other => StoreError::ReplayMismatch {
            case_id: case_id.clone(),
            detail: format!("action log does not replay: {other}"),
        },
    })?;
    Ok(record)
}

fn build_report(
    case_id: &str,
    raw: &RawReport,
    source: ReportSource,
    warnings: &mut Vec<Warning>,
) -> Result<DiagnosticReport, StoreError> {
    let invariant = |detail: String| StoreError::Invariant {
        case_id: case_id.to_owned(),
        detail,
    };
    let primary = Diagnosis::new(raw.primary.clone())
        .map_err(|e| invariant(format!("primary diagnosis: {e}")))?;

    let mut differentials: Vec<Diagnosis> = Vec::new();
    for raw_label in &raw.differentials {
        let dx = Diagnosis::new(raw_label.clone())
            .map_err(|e| invariant(format!("differential `{raw_label}`: {e}")))?;
        if dx.label() == primary.label() {
            return Err(invariant(format!(
                "primary diagnosis `{}` repeated in differentials",
                primary.label()
            )));
        }
        if let Some(existing) = differentials.iter().find(|d| d.label() == dx.label()) {
            warnings.push(Warning {
                case_id: Some(case_id.to_owned()),
                message: format!(
                    "differentials `{}` and `{}` normalize to the same label `{}`; \
                     keeping the first",
                    existing.raw(),
                    dx.raw(),
                    dx.label()
                ),
            });
            continue;
        }
        differentials.push(dx);
    }

    DiagnosticReport::new(primary, differentials, source)
        .map_err(|e| invariant(e.to_string()))
}

fn convert_action(case_id: &str, raw: &RawAction) -> Result<ValidationAction, StoreError> {
    let schema = |detail: String| StoreError::Schema {
        case_id: Some(case_id.to_owned()),
        detail,
    };
    let needs_target = matches!(raw.kind, ActionKind::Remove | ActionKind::Refine);
    let needs_value = matches!(raw.kind, ActionKind::Add | ActionKind::Refine);

    if needs_target && raw.target_label.is_none() {
        return Err(schema(format!("{} action requires target_label", raw.kind)));
    }
    if needs_value && raw.value.is_none() {
        return Err(schema(format!("{} action requires value", raw.kind)));
    }
    if !needs_value && raw.value.is_some() {
        return Err(schema(format!("{} action must not carry a value", raw.kind)));
    }
    if matches!(raw.kind, ActionKind::Add) && raw.target_label.is_some() {
        return Err(schema("add action must not carry a target_label".to_owned()));
    }

    let target_label = raw
        .target_label
        .as_deref()
        .map(|t| {
            normalize_label(t).map_err(|e| schema(format!("target_label `{t}`: {e}")))
        })
        .transpose()?;
    let value = raw
        .value
        .as_deref()
        .map(|v| Diagnosis::new(v).map_err(|e| schema(format!("action value `{v}`: {e}"))))
        .transpose()?;

    Ok(ValidationAction {
        kind: raw.kind,
        slot: raw.slot,
        target_label,
        value,
    })
}

/// Per-case ledger payloads, in append order. Payloads embed the case id so
/// the chain binds record identity to record content.
pub fn case_payloads(raw: &RawCase) -> Result<Vec<(RecordKind, String)>, StoreError> {
    let mut payloads = vec![(
        RecordKind::SnapshotR0,
        canonical_json(&ReportPayload {
            case_id: raw.case_id.clone(),
            physician_id: raw.physician_id.clone(),
            report: raw.r0.clone(),
        })?,
    )];
    if let Some(actions) = &raw.actions {
        payloads.push((
            RecordKind::ActionLog,
            canonical_json(&ActionsPayload {
                case_id: raw.case_id.clone(),
                actions: actions.clone(),
            })?,
        ));
    }
    payloads.push((
        RecordKind::FinalR1,
        canonical_json(&ReportPayload {
            case_id: raw.case_id.clone(),
            physician_id: raw.physician_id.clone(),
            report: raw.r1.clone(),
        })?,
    ));
    Ok(payloads)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ReportPayload {
    case_id: String,
    physician_id: String,
    report: RawReport,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ActionsPayload {
    case_id: String,
    actions: Vec<RawAction>,
}

/// Reassembles raw cases from ledger records, preserving snapshot order.
pub fn cases_from_ledger_records(records: &[LedgerRecord]) -> Result<Vec<RawCase>, StoreError> {
    struct Partial {
        physician_id: String,
        r0: RawReport,
        actions: Option<Vec<RawAction>>,
        r1: Option<RawReport>,
    }
    let mut order: Vec<String> = Vec::new();
    let mut partials: std::collections::BTreeMap<String, Partial> =
        std::collections::BTreeMap::new();

    for record in records {
        let schema = |detail: String| StoreError::Schema {
            case_id: Some(record.case_id.clone()),
            detail,
        };
        match record.record_kind {
            RecordKind::SnapshotR0 => {
                let payload: ReportPayload = serde_json::from_str(&record.payload)
                    .map_err(|e| schema(format!("bad snapshot payload: {e}")))?;
                if partials.contains_key(&record.case_id) {
                    return Err(schema("second snapshot_r0 for the case".to_owned()));
                }
                order.push(record.case_id.clone());
                partials.insert(
                    record.case_id.clone(),
                    Partial {
                        physician_id: payload.physician_id,
                        r0: payload.report,
                        actions: None,
                        r1: None,
                    },
                );
            }
            RecordKind::ActionLog => {
                let payload: ActionsPayload = serde_json::from_str(&record.payload)
                    .map_err(|e| schema(format!("bad action payload: {e}")))?;
                let partial = partials
                    .get_mut(&record.case_id)
                    .ok_or_else(|| schema("action_log without snapshot_r0".to_owned()))?;
                if partial.actions.is_some() {
                    return Err(schema("second action_log for the case".to_owned()));
                }
                partial.actions = Some(payload.actions);
            }
            RecordKind::FinalR1 => {
                let payload: ReportPayload = serde_json::from_str(&record.payload)
                    .map_err(|e| schema(format!("bad final payload: {e}")))?;
                let partial = partials
                    .get_mut(&record.case_id)
                    .ok_or_else(|| schema("final_r1 without snapshot_r0".to_owned()))?;
                if partial.r1.is_some() {
                    return Err(schema("second final_r1 for the case".to_owned()));
                }
                partial.r1 = Some(payload.report);
            }
        }
    }

    let mut cases = Vec::with_capacity(order.len());
    for case_id in order {
        let partial = partials.remove(&case_id).expect("inserted above");
        let r1 = partial.r1.ok_or_else(|| StoreError::Schema {
            case_id: Some(case_id.clone()),
            detail: "ledger holds no final_r1 for this case".to_owned(),
        })?;
        cases.push(RawCase {
            case_id,
            physician_id: partial.physician_id,
            r0: partial.r0,
            r1,
            actions: partial.actions,
        });
    }
    Ok(cases)
}

/// Converts a validated case back to its raw file form (original strings).
pub fn raw_from_case(case: &CaseRecord) -> RawCase {
    let raw_report = |report: &DiagnosticReport| RawReport {
        primary: report.primary().raw().to_owned(),
        differentials: report
            .differentials()
            .iter()
            .map(|d| d.raw().to_owned())
            .collect(),
    };
    RawCase {
        case_id: case.case_id.clone(),
        physician_id: case.physician_id.clone(),
        r0: raw_report(&case.r0),
        r1: raw_report(&case.r1),
        actions: case.actions.as_ref().map(|actions| {
            actions
                .iter()
                .map(|a| RawAction {
                    kind: a.kind,
                    slot: a.slot,
                    target_label: a.target_label.clone(),
                    value: a.value.as_ref().map(|d| d.raw().to_owned()),
                })
                .collect()
        }),
    }
}

/// Serializes cases as a pretty-printed JSON array, newline-terminated.
pub fn write_case_file(cases: &[RawCase]) -> String {
    let mut out = serde_json::to_string_pretty(cases).expect("case serialization");
    out.push('\n');
    out
}

/// Sanity replay of an already-validated cohort; used by the replay command
/// to re-derive every stored final report from its snapshot and action log.
pub fn replay_cohort(cases: &[CaseRecord]) -> Result<ReplaySummary, StoreError> {
    let mut with_actions = 0u64;
    for case in cases {
        if let Some(actions) = &case.actions {
            with_actions += 1;
            let replayed =
                apply_actions(&case.r0, actions).map_err(|e| StoreError::ReplayMismatch {
                    case_id: case.case_id.clone(),
                    detail: e.to_string(),
                })?;
            if !replayed.labels_equal(&case.r1) {
                return Err(StoreError::ReplayMismatch {
                    case_id: case.case_id.clone(),
                    detail: "replayed report differs from stored final report".to_owned(),
                });
            }
        }
    }
    Ok(ReplaySummary {
        total_cases: cases.len() as u64,
        cases_with_actions: with_actions,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ReplaySummary {
    pub total_cases: u64,
    pub cases_with_actions: u64,
}
