//! End-to-end tests of the `concord` binary: ingest → verify → replay →
//! analyze flows, exit-code discipline, and artifact reproducibility.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use concord_core::testkit::DEMO_COHORT_JSON;

fn concord() -> Command {
    Command::new(env!("CARGO_BIN_EXE_concord"))
}

fn write_fixture(dir: &Path) -> PathBuf {
    let path = dir.join("cohort.json");
    std::fs::write(&path, DEMO_COHORT_JSON).unwrap();
    path
}

fn run(cmd: &mut Command) -> Output {
    cmd.output().expect("spawn concord")
}

fn stdout_of(output: &Output) -> String {
    String::from_utf8_lossy(&output.stdout).into_owned()
}

fn stderr_of(output: &Output) -> String {
    String::from_utf8_lossy(&output.stderr).into_owned()
}

#[test]
fn ingest_verify_replay_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let cases = write_fixture(dir.path());
    let ledger = dir.path().join("cohort.ledger");

    let out = run(concord().arg("ingest").arg(&cases).arg("--ledger").arg(&ledger));
    assert!(out.status.success(), "{}", stderr_of(&out));
    assert!(stdout_of(&out).contains("21 case(s) as 63 record(s)"));

    let out = run(concord().arg("verify").arg(&ledger));
    assert!(out.status.success(), "{}", stderr_of(&out));
    assert!(stdout_of(&out).contains("63 record(s) verified"));

    let out = run(concord().arg("replay").arg(&ledger));
    assert!(out.status.success(), "{}", stderr_of(&out));
    assert!(stdout_of(&out).contains("21/21"));
}

#[test]
fn reingesting_the_same_file_is_rejected_and_rolled_back() {
    let dir = tempfile::tempdir().unwrap();
    let cases = write_fixture(dir.path());
    let ledger = dir.path().join("cohort.ledger");

    let out = run(concord().arg("ingest").arg(&cases).arg("--ledger").arg(&ledger));
    assert!(out.status.success());
    let committed = std::fs::read(&ledger).unwrap();

    let out = run(concord().arg("ingest").arg(&cases).arg("--ledger").arg(&ledger));
    assert_eq!(out.status.code(), Some(5), "{}", stderr_of(&out));
    assert!(stderr_of(&out).contains("snapshot"), "{}", stderr_of(&out));

    // Rollback left the ledger byte-identical and still valid.
    assert_eq!(std::fs::read(&ledger).unwrap(), committed);
    let out = run(concord().arg("verify").arg(&ledger));
    assert!(out.status.success());
}

#[test]
fn malformed_json_exits_with_schema_code_and_line() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.jsonl");
    std::fs::write(
        &path,
        "{\"case_id\":\"c1\",\"physician_id\":\"p\",\"r0\":{\"primary\":\"a\",\"differentials\":[]},\"r1\":{\"primary\":\"a\",\"differentials\":[]}}\nnot json\n",
    )
    .unwrap();
    let ledger = dir.path().join("x.ledger");
    let out = run(concord().arg("ingest").arg(&path).arg("--ledger").arg(&ledger));
    assert_eq!(out.status.code(), Some(3), "{}", stderr_of(&out));
    assert!(stderr_of(&out).contains("line 2"), "{}", stderr_of(&out));
}

#[test]
fn tampered_ledger_fails_verify_with_seq() {
    let dir = tempfile::tempdir().unwrap();
    let cases = write_fixture(dir.path());
    let ledger = dir.path().join("cohort.ledger");
    run(concord().arg("ingest").arg(&cases).arg("--ledger").arg(&ledger));

    let content = std::fs::read_to_string(&ledger).unwrap();
    let lines: Vec<&str> = content.lines().collect();
    // Every payload embeds a physician_id; flipping its case inside line 5
    // changes payload bytes without breaking JSON.
    let tampered = lines[5].replacen("physician", "phySician", 1);
    assert_ne!(&tampered, lines[5], "tamper target must exist");
    let mut new_content = lines.clone();
    new_content[5] = &tampered;
    std::fs::write(&ledger, new_content.join("\n") + "\n").unwrap();

    let out = run(concord().arg("verify").arg(&ledger));
    assert_eq!(out.status.code(), Some(5), "{}", stderr_of(&out));
    assert!(stderr_of(&out).contains("seq 5"), "{}", stderr_of(&out));
}

#[test]
fn analyze_writes_artifacts_and_prints_the_table() {
    let dir = tempfile::tempdir().unwrap();
    let cases = write_fixture(dir.path());
    let out_dir = dir.path().join("report");

    let out = run(concord()
        .arg("analyze")
        .arg(&cases)
        .arg("--out")
        .arg(&out_dir));
    assert!(out.status.success(), "{}", stderr_of(&out));
    let stdout = stdout_of(&out);
    assert!(stdout.contains("15/21 (71.4%)"), "{stdout}");
    assert!(stdout.contains("[83.9%, 100.0%]"), "{stdout}");
    assert!(stdout.contains("holds"), "{stdout}");

    assert!(out_dir.join("per_case.csv").exists());
    assert!(out_dir.join("summary.json").exists());
    assert!(out_dir.join("diff_breakdown.tsv").exists());

    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out_dir.join("summary.json")).unwrap())
            .unwrap();
    assert_eq!(summary["metrics"]["pmr"]["successes"], 15);
    assert_eq!(summary["metrics"]["ccr"]["successes"], 21);
    assert_eq!(summary["config"]["tau"], "0.6");
    assert_eq!(summary["monotonicity"]["holds"], true);
}

#[test]
fn analyze_accepts_a_ledger_as_input() {
    let dir = tempfile::tempdir().unwrap();
    let cases = write_fixture(dir.path());
    let ledger = dir.path().join("cohort.ledger");
    run(concord().arg("ingest").arg(&cases).arg("--ledger").arg(&ledger));

    let out_from_file = dir.path().join("from-file");
    let out_from_ledger = dir.path().join("from-ledger");
    assert!(run(concord().arg("analyze").arg(&cases).arg("--out").arg(&out_from_file))
        .status
        .success());
    assert!(run(concord()
        .arg("analyze")
        .arg(&ledger)
        .arg("--out")
        .arg(&out_from_ledger))
    .status
    .success());

    // Identical metrics regardless of the input route; only the provenance
    // echo (input path) differs.
    let file_summary: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(out_from_file.join("summary.json")).unwrap(),
    )
    .unwrap();
    let ledger_summary: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(out_from_ledger.join("summary.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(file_summary["metrics"], ledger_summary["metrics"]);
    let csv_a = std::fs::read_to_string(out_from_file.join("per_case.csv")).unwrap();
    let csv_b = std::fs::read_to_string(out_from_ledger.join("per_case.csv")).unwrap();
    let strip = |s: &str| {
        s.lines()
            .filter(|l| !l.starts_with("# input="))
            .collect::<Vec<_>>()
            .join("\n")
    };
    assert_eq!(strip(&csv_a), strip(&csv_b));
}

#[test]
fn analyze_outputs_are_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let cases = write_fixture(dir.path());
    let out_a = dir.path().join("a");
    let out_b = dir.path().join("b");
    for out_dir in [&out_a, &out_b] {
        let out = run(concord()
            .arg("analyze")
            .arg(&cases)
            .arg("--tau")
            .arg("0.6")
            .arg("--out")
            .arg(out_dir));
        assert!(out.status.success());
    }
    for artifact in ["per_case.csv", "summary.json", "diff_breakdown.tsv"] {
        let a = std::fs::read(out_a.join(artifact)).unwrap();
        let b = std::fs::read(out_b.join(artifact)).unwrap();
        assert_eq!(a, b, "{artifact} differs between runs");
    }
}

#[test]
fn out_of_range_tau_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cases = write_fixture(dir.path());
    let out = run(concord()
        .arg("analyze")
        .arg(&cases)
        .arg("--tau")
        .arg("1.01"));
    assert_eq!(out.status.code(), Some(1), "{}", stderr_of(&out));
    assert!(stderr_of(&out).contains("[0, 1]"), "{}", stderr_of(&out));
}

#[test]
fn strict_mode_turns_warnings_into_errors() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("short.json");
    // Snapshot with two differentials: legal, but warned.
    std::fs::write(
        &path,
        r#"[{"case_id":"c1","physician_id":"p1",
            "r0":{"primary":"eczema","differentials":["tinea corporis","psoriasis"]},
            "r1":{"primary":"eczema","differentials":["tinea corporis","psoriasis"]}}]"#,
    )
    .unwrap();

    let out = run(concord().arg("analyze").arg(&path).arg("--out").arg(dir.path().join("o")));
    assert!(out.status.success(), "{}", stderr_of(&out));
    assert!(stderr_of(&out).contains("warning"), "{}", stderr_of(&out));

    let out = run(concord()
        .arg("analyze")
        .arg(&path)
        .arg("--strict")
        .arg("--out")
        .arg(dir.path().join("o2")));
    assert_eq!(out.status.code(), Some(4), "{}", stderr_of(&out));
}

#[test]
fn synth_is_deterministic_and_replayable() {
    let dir = tempfile::tempdir().unwrap();
    let out_a = dir.path().join("a.json");
    let out_b = dir.path().join("b.json");
    for path in [&out_a, &out_b] {
        let out = run(concord()
            .arg("synth")
            .arg("--seed")
            .arg("42")
            .arg("--cases")
            .arg("12")
            .arg("--out")
            .arg(path));
        assert!(out.status.success(), "{}", stderr_of(&out));
        assert!(stdout_of(&out).contains("seed 42"));
    }
    assert_eq!(
        std::fs::read(&out_a).unwrap(),
        std::fs::read(&out_b).unwrap(),
        "same seed must produce byte-identical cohorts"
    );

    let out = run(concord().arg("replay").arg(&out_a));
    assert!(out.status.success(), "{}", stderr_of(&out));
    assert!(stdout_of(&out).contains("12/12"));

    // And the generated cohort ingests + analyzes cleanly end to end.
    let ledger = dir.path().join("syn.ledger");
    let out = run(concord().arg("ingest").arg(&out_a).arg("--ledger").arg(&ledger));
    assert!(out.status.success(), "{}", stderr_of(&out));
    let out = run(concord()
        .arg("analyze")
        .arg(&ledger)
        .arg("--out")
        .arg(dir.path().join("syn-report")));
    assert!(out.status.success(), "{}", stderr_of(&out));
}

#[test]
fn rendered_table_agrees_with_per_case_csv() {
    let dir = tempfile::tempdir().unwrap();
    let cases = write_fixture(dir.path());
    let out_dir = dir.path().join("report");
    let out = run(concord().arg("analyze").arg(&cases).arg("--out").arg(&out_dir));
    assert!(out.status.success());
    let table = stdout_of(&out);

    // Recompute the combined column from the CSV rows.
    let csv = std::fs::read_to_string(out_dir.join("per_case.csv")).unwrap();
    let mut rows = Vec::new();
    for line in csv.lines() {
        if line.starts_with('#') || line.starts_with("case_id") {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        rows.push((
            fields[2] == "1",                 // m_exact
            fields[3] == "1",                 // m_similar
            fields[8] == "1",                 // acm
            fields[9].to_owned(),             // classification
        ));
    }
    assert_eq!(rows.len(), 21);
    let exact = rows.iter().filter(|r| r.0).count();
    let adjusted = rows.iter().filter(|r| r.0 || r.1).count();
    let any = rows.iter().filter(|r| r.2).count();
    let cross = rows.iter().filter(|r| r.3 == "cross_category").count();
    assert!(table.contains(&format!("{exact}/21")), "{table}");
    assert!(table.contains(&format!("{adjusted}/21")));
    assert!(table.contains(&format!("{any}/21")));
    assert!(table.contains(&format!("{cross}/21")));
}

#[test]
fn ci_method_override_changes_the_table_interval() {
    let dir = tempfile::tempdir().unwrap();
    let cases = write_fixture(dir.path());
    let out = run(concord()
        .arg("analyze")
        .arg(&cases)
        .arg("--ci-method")
        .arg("wilson")
        .arg("--out")
        .arg(dir.path().join("o")));
    assert!(out.status.success(), "{}", stderr_of(&out));
    assert!(
        stdout_of(&out).contains("[84.5%, 100.0%]"),
        "{}",
        stdout_of(&out)
    );
}

#[test]
fn format_flag_selects_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let cases = write_fixture(dir.path());
    let out_dir = dir.path().join("json-only");
    let out = run(concord()
        .arg("analyze")
        .arg(&cases)
        .arg("--format")
        .arg("json")
        .arg("--out")
        .arg(&out_dir));
    assert!(out.status.success(), "{}", stderr_of(&out));
    assert!(out_dir.join("summary.json").exists());
    assert!(!out_dir.join("per_case.csv").exists());
    assert!(!out_dir.join("diff_breakdown.tsv").exists());
    assert!(!stdout_of(&out).contains("Exact Primary Matches"));

    let out = run(concord()
        .arg("analyze")
        .arg(&cases)
        .arg("--format")
        .arg("pdf")
        .arg("--out")
        .arg(dir.path().join("x")));
    assert_eq!(out.status.code(), Some(1), "{}", stderr_of(&out));
}

#[test]
fn verify_on_missing_file_is_a_config_error() {
    let out = run(concord().arg("verify").arg("/nonexistent/path.ledger"));
    assert_eq!(out.status.code(), Some(1), "{}", stderr_of(&out));
}

#[test]
fn identity_cohort_scores_perfect_agreement() {
    let dir = tempfile::tempdir().unwrap();
    let cohort = dir.path().join("identity.json");
    let out = run(concord()
        .arg("synth")
        .arg("--seed")
        .arg("7")
        .arg("--cases")
        .arg("10")
        .arg("--p-exact")
        .arg("1.0")
        .arg("--p-lexical")
        .arg("0")
        .arg("--p-reprioritize")
        .arg("0")
        .arg("--p-replace")
        .arg("0")
        .arg("--p-remove")
        .arg("0")
        .arg("--p-add")
        .arg("0")
        .arg("--out")
        .arg(&cohort));
    assert!(out.status.success(), "{}", stderr_of(&out));

    let out_dir = dir.path().join("report");
    let out = run(concord().arg("analyze").arg(&cohort).arg("--out").arg(&out_dir));
    assert!(out.status.success(), "{}", stderr_of(&out));
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out_dir.join("summary.json")).unwrap())
            .unwrap();
    for metric in ["pmr", "amr", "ccr"] {
        assert_eq!(summary["metrics"][metric]["successes"], 10, "{metric}");
        assert_eq!(summary["metrics"]["interpretation"][metric], "excellent");
    }
}

#[test]
fn empty_cohort_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("empty.json");
    std::fs::write(&path, "[]").unwrap();
    let out = run(concord().arg("analyze").arg(&path));
    assert_eq!(out.status.code(), Some(1), "{}", stderr_of(&out));
    assert!(stderr_of(&out).contains("empty"), "{}", stderr_of(&out));
}
