//! Output artifacts: per-case CSV, cohort summary JSON, differential-change
//! TSV, and the rendered summary table.
//!
//! Every artifact opens with the resolved run configuration so results stay
//! traceable to the exact parameters that produced them. Case rows are
//! emitted in case-id order and numbers are formatted deterministically, so
//! identical inputs and configuration reproduce identical bytes.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::concordance::CaseConcordance;
use crate::stats::{CohortMetrics, MonotonicityReport};
use crate::store::Warning;

/// Resolved run configuration, echoed into every artifact. Keys and values
/// are plain strings; ordering is alphabetical and stable.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct Provenance {
    pub entries: BTreeMap<String, String>,
}

impl Provenance {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn set(&mut self, key: &str, value: impl ToString) -> &mut Self {
        self.entries.insert(key.to_owned(), value.to_string());
        self
    }

    fn comment_header(&self, comment: &str) -> String {
        let mut out = String::new();
        for (key, value) in &self.entries {
            out.push_str(&format!("{comment} {key}={value}\n"));
        }
        out
    }
}

/// Percentage with one decimal place, rounded half-up: 0.714285… → 71.4.
pub fn pct1(rate: f64) -> f64 {
    (rate * 1000.0).round() / 10.0
}

/// One row per case with every indicator. Header lines carry the run
/// configuration as `#` comments before the CSV header.
pub fn per_case_csv(results: &[CaseConcordance], provenance: &Provenance) -> String {
    let mut writer = csv::Writer::from_writer(Vec::new());
    writer
        .write_record([
            "case_id",
            "physician_id",
            "m_exact",
            "m_similar",
            "cc_p_to_d",
            "cc_d_to_p",
            "overlap",
            "overlap_similar",
            "acm",
            "classification",
            "matched_pair_count",
            "additions",
            "removals",
            "unchanged",
        ])
        .expect("csv header");
    for r in results {
        writer
            .write_record([
                r.case_id.as_str(),
                r.physician_id.as_str(),
                indicator(r.m_exact),
                indicator(r.m_similar),
                indicator(r.cc_p_to_d),
                indicator(r.cc_d_to_p),
                &r.overlap.to_string(),
                &r.overlap_similar.to_string(),
                indicator(r.acm),
                &r.classification.to_string(),
                &r.matched_pairs.len().to_string(),
                &r.diff.additions.len().to_string(),
                &r.diff.removals.len().to_string(),
                &r.diff.unchanged.len().to_string(),
            ])
            .expect("csv row");
    }
    let body = String::from_utf8(writer.into_inner().expect("csv buffer")).expect("utf8 csv");
    format!("{}{}", provenance.comment_header("#"), body)
}

fn indicator(flag: bool) -> &'static str {
    if flag {
        "1"
    } else {
        "0"
    }
}

#[derive(Serialize)]
struct Summary<'a> {
    config: &'a BTreeMap<String, String>,
    metrics: &'a CohortMetrics,
    monotonicity: &'a MonotonicityReport,
    warnings: &'a [Warning],
}

/// Full-precision cohort summary as pretty JSON.
pub fn summary_json(
    metrics: &CohortMetrics,
    monotonicity: &MonotonicityReport,
    warnings: &[Warning],
    provenance: &Provenance,
) -> String {
    let summary = Summary {
        config: &provenance.entries,
        metrics,
        monotonicity,
        warnings,
    };
    let mut out = serde_json::to_string_pretty(&summary).expect("summary serialization");
    out.push('\n');
    out
}

/// Per-case differential-change counts as TSV, for add/remove/unchanged
/// composition plots. A trailing `cohort` row carries the totals.
pub fn diff_tsv(results: &[CaseConcordance], provenance: &Provenance) -> String {
    let mut out = provenance.comment_header("#");
    out.push_str("case_id\tn_diff_r0\tn_diff_r1\tadditions\tremovals\tunchanged\n");
    let (mut add, mut rem, mut unch) = (0usize, 0usize, 0usize);
    for r in results {
        let a = r.diff.additions.len();
        let d = r.diff.removals.len();
        let u = r.diff.unchanged.len();
        add += a;
        rem += d;
        unch += u;
        out.push_str(&format!(
            "{}\t{}\t{}\t{}\t{}\t{}\n",
            r.case_id,
            d + u,
            a + u,
            a,
            d,
            u
        ));
    }
    out.push_str(&format!(
        "cohort\t{}\t{}\t{}\t{}\t{}\n",
        rem + unch,
        add + unch,
        add,
        rem,
        unch
    ));
    out
}

/// Text table of the headline metrics, one column per physician stratum
/// plus the combined cohort.
pub fn render_table(metrics: &CohortMetrics) -> String {
    let strata: Vec<(&String, &CohortMetrics)> = metrics.per_stratum.iter().collect();

    let fraction = |m: &CohortMetrics, successes: u64| format!("{}/{}", successes, m.n_cases);
    let fraction_pct = |m: &CohortMetrics, successes: u64| {
        format!(
            "{}/{} ({:.1}%)",
            successes,
            m.n_cases,
            pct1(successes as f64 / m.n_cases as f64)
        )
    };

    let mut rows: Vec<Vec<String>> = Vec::new();
    let mut header = vec!["Metric".to_owned()];
    header.extend(strata.iter().map(|(name, _)| (*name).clone()));
    header.push("Combined".to_owned());
    rows.push(header);

    // `combined` is true only in the last column, where counts also carry
    // the percentage and the CI is shown.
    let mut push_row = |label: &str, cell: &dyn Fn(&CohortMetrics, bool) -> String| {
        let mut row = vec![label.to_owned()];
        row.extend(strata.iter().map(|(_, m)| cell(m, false)));
        row.push(cell(metrics, true));
        rows.push(row);
    };

    push_row("Exact Primary Matches", &|m, combined| {
        if combined {
            fraction_pct(m, m.pmr.successes)
        } else {
            fraction(m, m.pmr.successes)
        }
    });
    push_row("Similarity-Adjusted", &|m, combined| {
        if combined {
            fraction_pct(m, m.amr.successes)
        } else {
            fraction(m, m.amr.successes)
        }
    });
    push_row("Cross-Category Cases", &|m, combined| {
        if combined {
            fraction_pct(m, m.cross_category_rate.successes)
        } else {
            fraction(m, m.cross_category_rate.successes)
        }
    });
    push_row("Cases with Any Match", &|m, _| fraction(m, m.ccr.successes));
    push_row("CCR (%)", &|m, _| format!("{:.1}", pct1(m.ccr.value())));
    let ci_label = format!(
        "{:.0}% CI (CCR)",
        metrics.intervals["ccr"].headline_interval().level * 100.0
    );
    push_row(&ci_label, &|m, combined| {
        if combined {
            let ci = m.intervals["ccr"].headline_interval();
            format!("[{:.1}%, {:.1}%]", pct1(ci.lower), pct1(ci.upper))
        } else {
            "--".to_owned()
        }
    });
    push_row("Kappa-like (Comprehensive)", &|m, _| {
        format!("{:.3}", m.kappa_like)
    });
    push_row("Interpretation", &|m, _| {
        format!("{}", crate::stats::interpret(m.ccr.value()))
    });

    let widths: Vec<usize> = (0..rows[0].len())
        .map(|col| rows.iter().map(|row| row[col].len()).max().unwrap_or(0))
        .collect();
    let mut out = String::new();
    for (index, row) in rows.iter().enumerate() {
        let line: Vec<String> = row
            .iter()
            .zip(&widths)
            .map(|(cell, width)| format!("{cell:<width$}"))
            .collect();
        out.push_str(line.join("  ").trim_end());
        out.push('\n');
        if index == 0 {
            let total = widths.iter().sum::<usize>() + 2 * (widths.len() - 1);
            out.push_str(&"-".repeat(total));
            out.push('\n');
        }
    }
    out
}
