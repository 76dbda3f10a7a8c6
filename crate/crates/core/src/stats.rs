//! Cohort aggregation: rates, binomial confidence intervals, interpretation
//! bands, the level-monotonicity check, and per-physician strata.
//!
//! Three interval methods are always computed. The headline interval is
//! Clopper–Pearson at boundary proportions (all successes or none) and
//! Wilson otherwise. Exported percentages round half-up to one decimal
//! place; the JSON summary keeps full precision.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use statrs::distribution::{Beta, Continuous, ContinuousCDF, Normal};
use thiserror::Error;

use crate::concordance::{CaseConcordance, Classification};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum StatsError {
    #[error("cannot aggregate an empty cohort")]
    EmptyCohort,
    #[error("invalid proportion: {0}")]
    InvalidProportion(String),
}

/// An observed proportion kept as exact integers; `value` is derived from
/// them, never re-parsed from floats.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Proportion {
    pub successes: u64,
    pub trials: u64,
}

impl Proportion {
    pub fn new(successes: u64, trials: u64) -> Result<Self, StatsError> {
        if trials == 0 {
            return Err(StatsError::InvalidProportion(
                "trials must be positive".into(),
            ));
        }
        if successes > trials {
            return Err(StatsError::InvalidProportion(format!(
                "successes {successes} exceed trials {trials}"
            )));
        }
        Ok(Self { successes, trials })
    }

    pub fn value(&self) -> f64 {
        self.successes as f64 / self.trials as f64
    }

    /// True when every trial succeeded or none did.
    pub fn is_boundary(&self) -> bool {
        self.successes == 0 || self.successes == self.trials
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CiMethod {
    Wald,
    Wilson,
    ClopperPearson,
}

impl std::fmt::Display for CiMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            CiMethod::Wald => "wald",
            CiMethod::Wilson => "wilson",
            CiMethod::ClopperPearson => "clopper_pearson",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceInterval {
    pub lower: f64,
    pub upper: f64,
    pub method: CiMethod,
    pub level: f64,
    /// Set when the interval collapsed to a point (Wald at a boundary
    /// proportion); such intervals are reported but carry no information.
    pub degenerate: bool,
}

impl ConfidenceInterval {
    pub fn contains(&self, p: f64) -> bool {
        self.lower <= p && p <= self.upper
    }

    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }
}

/// Standard error of an observed proportion, `sqrt(p(1-p)/n)`.
pub fn standard_error(p: &Proportion) -> f64 {
    let value = p.value();
    (value * (1.0 - value) / p.trials as f64).sqrt()
}

/// Two-sided standard-normal critical value for a confidence level
/// (1.959964 at 0.95).
pub fn z_critical(level: f64) -> f64 {
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    normal.inverse_cdf(0.5 + level / 2.0)
}

/// Normal-approximation interval `p ± z·SE`, clamped to [0, 1].
pub fn wald_ci(p: &Proportion, level: f64) -> ConfidenceInterval {
    let value = p.value();
    let margin = z_critical(level) * standard_error(p);
    ConfidenceInterval {
        lower: (value - margin).max(0.0),
        upper: (value + margin).min(1.0),
        method: CiMethod::Wald,
        level,
        degenerate: margin == 0.0,
    }
}

/// Wilson score interval: center `(p + z²/2n) / (1 + z²/n)`, half-width
/// `z·sqrt(p(1-p)/n + z²/4n²) / (1 + z²/n)`.
pub fn wilson_ci(p: &Proportion, level: f64) -> ConfidenceInterval {
    let value = p.value();
    let n = p.trials as f64;
    let z = z_critical(level);
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (value + z2 / (2.0 * n)) / denom;
    let half_width = z * (value * (1.0 - value) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    // At the boundary proportions center and half-width are equal in exact
    // arithmetic; snap the touching bound so rounding residue cannot push it
    // past the observed value.
    let lower = if p.successes == 0 {
        0.0
    } else {
        (center - half_width).max(0.0)
    };
    let upper = if p.successes == p.trials {
        1.0
    } else {
        (center + half_width).min(1.0)
    };
    ConfidenceInterval {
        lower,
        upper,
        method: CiMethod::Wilson,
        level,
        degenerate: false,
    }
}

/// Exact (Clopper–Pearson) binomial interval via Beta quantiles, with the
/// closed-form boundary shortcuts: `lower = (α/2)^(1/n)` when all trials
/// succeeded and the mirror image when none did.
pub fn clopper_pearson_ci(p: &Proportion, level: f64) -> ConfidenceInterval {
    let alpha = 1.0 - level;
    let m = p.successes;
    let n = p.trials;
    let lower = if m == 0 {
        0.0
    } else if m == n {
        (alpha / 2.0).powf(1.0 / n as f64)
    } else {
        beta_quantile(alpha / 2.0, m as f64, (n - m + 1) as f64)
    };
    let upper = if m == n {
        1.0
    } else if m == 0 {
        1.0 - (alpha / 2.0).powf(1.0 / n as f64)
    } else {
        beta_quantile(1.0 - alpha / 2.0, (m + 1) as f64, (n - m) as f64)
    };
    ConfidenceInterval {
        lower: lower.max(0.0),
        upper: upper.min(1.0),
        method: CiMethod::ClopperPearson,
        level,
        degenerate: false,
    }
}

/// Beta distribution quantile, polished with a few Newton steps so the
/// boundary identities hold to ~1e-12.
pub fn beta_quantile(q: f64, shape_a: f64, shape_b: f64) -> f64 {
    let dist = Beta::new(shape_a, shape_b).expect("valid beta shapes");
    let mut x = dist.inverse_cdf(q).clamp(f64::MIN_POSITIVE, 1.0);
    for _ in 0..4 {
        let pdf = dist.pdf(x);
        if !pdf.is_finite() || pdf == 0.0 {
            break;
        }
        let step = (dist.cdf(x) - q) / pdf;
        let next = (x - step).clamp(0.0, 1.0);
        if (next - x).abs() < 1e-15 {
            x = next;
            break;
        }
        x = next;
    }
    x
}

/// Compute an interval with an explicitly chosen method.
pub fn interval_for(method: CiMethod, p: &Proportion, level: f64) -> ConfidenceInterval {
    match method {
        CiMethod::Wald => wald_ci(p, level),
        CiMethod::Wilson => wilson_ci(p, level),
        CiMethod::ClopperPearson => clopper_pearson_ci(p, level),
    }
}

/// Agreement interpretation band.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Band {
    Excellent,
    Substantial,
    Moderate,
    FairPoor,
}

impl std::fmt::Display for Band {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Band::Excellent => "Excellent",
            Band::Substantial => "Substantial",
            Band::Moderate => "Moderate",
            Band::FairPoor => "Fair/Poor",
        };
        f.write_str(s)
    }
}

/// Maps a rate onto the conventional agreement bands: Excellent >= 0.80,
/// Substantial [0.60, 0.80), Moderate [0.40, 0.60), Fair/Poor below.
pub fn interpret(rate: f64) -> Band {
    if rate >= 0.80 {
        Band::Excellent
    } else if rate >= 0.60 {
        Band::Substantial
    } else if rate >= 0.40 {
        Band::Moderate
    } else {
        Band::FairPoor
    }
}

/// All three interval methods for one metric plus the headline choice.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricIntervals {
    pub wald: ConfidenceInterval,
    pub wilson: ConfidenceInterval,
    pub clopper_pearson: ConfidenceInterval,
    /// Clopper–Pearson at boundary proportions, Wilson otherwise.
    pub headline: CiMethod,
}

impl MetricIntervals {
    pub fn compute(p: &Proportion, level: f64) -> Self {
        let headline = if p.is_boundary() {
            CiMethod::ClopperPearson
        } else {
            CiMethod::Wilson
        };
        Self {
            wald: wald_ci(p, level),
            wilson: wilson_ci(p, level),
            clopper_pearson: clopper_pearson_ci(p, level),
            headline,
        }
    }

    pub fn headline_interval(&self) -> &ConfidenceInterval {
        match self.headline {
            CiMethod::Wald => &self.wald,
            CiMethod::Wilson => &self.wilson,
            CiMethod::ClopperPearson => &self.clopper_pearson,
        }
    }
}

/// Aggregated cohort metrics. `per_stratum` holds one nested summary per
/// physician id (without further nesting).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CohortMetrics {
    pub n_cases: u64,
    /// Primary match rate (exact).
    pub pmr: Proportion,
    /// Adjusted match rate (exact or similar primary).
    pub amr: Proportion,
    /// Comprehensive concordance rate (any-category match).
    pub ccr: Proportion,
    /// Cases classified cross-category (mutually exclusive bucket counts).
    pub cross_category_rate: Proportion,
    /// Cases classified differential-only.
    pub differential_only_rate: Proportion,
    /// Cases with no match at any level; complements `ccr`.
    pub divergent_rate: Proportion,
    pub mean_overlap: f64,
    /// Cases sharing at least one differential.
    pub pct_any_overlap: Proportion,
    pub intervals: BTreeMap<String, MetricIntervals>,
    pub interpretation: BTreeMap<String, Band>,
    /// Observed any-match agreement, mirrored from `ccr`. No
    /// chance-correction model backs it, hence the caveat flag.
    pub kappa_like: f64,
    pub kappa_like_caveat: bool,
    pub per_stratum: BTreeMap<String, CohortMetrics>,
}

/// Aggregates per-case results into cohort metrics at the given confidence
/// level, including per-physician strata and intervals from all three
/// methods.
pub fn cohort_metrics(
    results: &[CaseConcordance],
    level: f64,
) -> Result<CohortMetrics, StatsError> {
    let combined = aggregate(results, level)?;
    let mut strata: BTreeMap<String, Vec<CaseConcordance>> = BTreeMap::new();
    for r in results {
        strata
            .entry(r.physician_id.clone())
            .or_default()
            .push(r.clone());
    }
    let mut per_stratum = BTreeMap::new();
    for (physician, cases) in strata {
        per_stratum.insert(physician, aggregate(&cases, level)?);
    }
    Ok(CohortMetrics {
        per_stratum,
        ..combined
    })
}

fn aggregate(results: &[CaseConcordance], level: f64) -> Result<CohortMetrics, StatsError> {
    if results.is_empty() {
        return Err(StatsError::EmptyCohort);
    }
    let n = results.len() as u64;
    let count = |pred: &dyn Fn(&CaseConcordance) -> bool| -> u64 {
        results.iter().filter(|r| pred(r)).count() as u64
    };

    let pmr = Proportion::new(count(&|r| r.m_exact), n)?;
    let amr = Proportion::new(count(&|r| r.m_exact || r.m_similar), n)?;
    let ccr = Proportion::new(count(&|r| r.acm), n)?;
    let cross_category_rate = Proportion::new(
        count(&|r| r.classification == Classification::CrossCategory),
        n,
    )?;
    let differential_only_rate = Proportion::new(
        count(&|r| r.classification == Classification::DifferentialOnly),
        n,
    )?;
    let divergent_rate = Proportion::new(
        count(&|r| r.classification == Classification::Divergent),
        n,
    )?;
    let pct_any_overlap = Proportion::new(count(&|r| r.overlap >= 1), n)?;
    let total_overlap: usize = results.iter().map(|r| r.overlap).sum();
    let mean_overlap = total_overlap as f64 / n as f64;

    let mut intervals = BTreeMap::new();
    let mut interpretation = BTreeMap::new();
    for (name, p) in [
        ("pmr", &pmr),
        ("amr", &amr),
        ("ccr", &ccr),
        ("cross_category_rate", &cross_category_rate),
        ("differential_only_rate", &differential_only_rate),
        ("divergent_rate", &divergent_rate),
        ("pct_any_overlap", &pct_any_overlap),
    ] {
        intervals.insert(name.to_owned(), MetricIntervals::compute(p, level));
    }
    for (name, p) in [("pmr", &pmr), ("amr", &amr), ("ccr", &ccr)] {
        interpretation.insert(name.to_owned(), interpret(p.value()));
    }

    Ok(CohortMetrics {
        n_cases: n,
        kappa_like: ccr.value(),
        kappa_like_caveat: true,
        pmr,
        amr,
        ccr,
        cross_category_rate,
        differential_only_rate,
        divergent_rate,
        mean_overlap,
        pct_any_overlap,
        intervals,
        interpretation,
        per_stratum: BTreeMap::new(),
    })
}

/// Outcome of the level-hierarchy consistency check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonotonicityReport {
    pub holds: bool,
    pub detail: String,
}

/// Checks `PMR <= AMR <= CCR`. A violation cannot arise from data; it
/// indicates an implementation bug, so callers treat `holds == false` as a
/// hard internal-consistency failure.
pub fn check_monotonicity(metrics: &CohortMetrics) -> MonotonicityReport {
    let (pmr, amr, ccr) = (
        metrics.pmr.successes,
        metrics.amr.successes,
        metrics.ccr.successes,
    );
    let holds = pmr <= amr && amr <= ccr;
    let detail = format!(
        "PMR {}/{n} <= AMR {}/{n} <= CCR {}/{n}: {}",
        pmr,
        amr,
        ccr,
        if holds { "holds" } else { "VIOLATED" },
        n = metrics.pmr.trials
    );
    MonotonicityReport { holds, detail }
}
