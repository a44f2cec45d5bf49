//! Linear scoring: penalty totals, the raw quality score, the calibrated
//! quality score and the pass/fail rating.
//!
//! All arithmetic is exact decimal arithmetic. Divisions are arranged so that
//! the pass/fail boundary is hit exactly: a sample whose NPT equals the APP
//! scores exactly PT on the calibrated scale.

use std::collections::BTreeMap;
use std::fmt;

use rust_decimal::Decimal;
use serde::{Deserialize, Serialize};

use crate::annotation::{ErrorCountCell, EvaluationSample};
use crate::error::{Error, Result};
use crate::metric::{MetricSpec, SeveritySystem};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Rating {
    Pass,
    Fail,
}

impl fmt::Display for Rating {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Rating::Pass => "PASS",
            Rating::Fail => "FAIL",
        })
    }
}

/// Intermediate penalty totals, unrounded.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PenaltyBreakdown {
    /// Error type penalty total per error type id.
    pub etpt_by_type: BTreeMap<String, Decimal>,
    /// Absolute penalty total.
    pub apt: Decimal,
    /// Per-word penalty total, `apt / ewc`.
    pub pwpt: Decimal,
    /// Normed penalty total, `apt * rwc / ewc`.
    pub npt: Decimal,
}

fn overflow() -> Error {
    Error::invalid("sample", "penalty arithmetic overflows the decimal range")
}

fn mul(a: Decimal, b: Decimal) -> Result<Decimal> {
    a.checked_mul(b).ok_or_else(overflow)
}

fn add(a: Decimal, b: Decimal) -> Result<Decimal> {
    a.checked_add(b).ok_or_else(overflow)
}

/// Weighted penalty total for one error type: the sum of count times severity
/// multiplier over its cells, times the error type weight.
pub fn error_type_penalty_total<'a>(
    cells: impl IntoIterator<Item = &'a ErrorCountCell>,
    severity: &SeveritySystem,
    weight: Decimal,
) -> Result<Decimal> {
    let mut total = Decimal::ZERO;
    for cell in cells {
        let multiplier = severity.multiplier(&cell.severity_name)?;
        total = add(total, mul(Decimal::from(cell.count), multiplier)?)?;
    }
    mul(total, weight)
}

pub fn penalty_breakdown(sample: &EvaluationSample, spec: &MetricSpec) -> Result<PenaltyBreakdown> {
    sample.validate()?;
    for cell in &sample.cells {
        if spec.node(&cell.error_type_id).is_none() {
            return Err(Error::UnknownErrorType(cell.error_type_id.clone()));
        }
    }

    let mut etpt_by_type = BTreeMap::new();
    let mut apt = Decimal::ZERO;
    for node in &spec.typology {
        let cells = sample.cells.iter().filter(|c| c.error_type_id == node.id);
        let etpt = error_type_penalty_total(cells, &spec.severity, node.weight)?;
        apt = add(apt, etpt)?;
        etpt_by_type.insert(node.id.clone(), etpt);
    }

    let ewc = Decimal::from(sample.ewc);
    let pwpt = apt / ewc;
    let npt = mul(apt, Decimal::from(spec.rwc))? / ewc;
    Ok(PenaltyBreakdown {
        etpt_by_type,
        apt,
        pwpt,
        npt,
    })
}

/// Raw quality score, `msv - npt * msv / rwc` (equivalently `msv * (1 - pwpt)`).
/// Negative when the sample carries more penalty points than words.
pub fn raw_score(breakdown: &PenaltyBreakdown, spec: &MetricSpec) -> Decimal {
    spec.msv - breakdown.npt * spec.msv / Decimal::from(spec.rwc)
}

/// Raw score a sample with exactly APP penalty points per RWC receives.
pub fn raw_passing_threshold(spec: &MetricSpec) -> Decimal {
    spec.msv - spec.app * spec.msv / Decimal::from(spec.rwc)
}

/// `dpi / app`: how one normed penalty point maps onto the calibrated scale.
pub fn scaling_factor(spec: &MetricSpec) -> Result<Decimal> {
    if spec.app <= Decimal::ZERO {
        return Err(Error::Precondition("app must be positive".into()));
    }
    Ok(spec.dpi() / spec.app)
}

/// Calibrated quality score, `msv - npt * sf`.
///
/// Evaluated as `msv - npt * dpi / app` so that `npt == app` yields `pt`
/// without the rounding a precomputed scaling factor would introduce.
pub fn calibrated_score(breakdown: &PenaltyBreakdown, spec: &MetricSpec) -> Result<Decimal> {
    if spec.app <= Decimal::ZERO {
        return Err(Error::Precondition("app must be positive".into()));
    }
    Ok(spec.msv - mul(breakdown.npt, spec.dpi())? / spec.app)
}

/// Pass iff the unrounded score reaches the threshold and no critical error
/// trips the auto-fail override.
pub fn rate_against(score: Decimal, threshold: Decimal, critical_auto_fail: bool, critical_count: u64) -> Rating {
    if score >= threshold && !(critical_auto_fail && critical_count > 0) {
        Rating::Pass
    } else {
        Rating::Fail
    }
}

/// Rates a calibrated-scale score against the metric's passing threshold.
pub fn rate(score: Decimal, spec: &MetricSpec, critical_count: u64) -> Rating {
    rate_against(score, spec.pt, spec.severity.critical_auto_fail, critical_count)
}

/// Number of errors recorded at the most severe level.
pub fn critical_count(sample: &EvaluationSample, spec: &MetricSpec) -> u64 {
    let Some(critical) = spec.severity.critical_level() else {
        return 0;
    };
    sample
        .cells
        .iter()
        .filter(|c| c.severity_name == critical.name)
        .map(|c| c.count)
        .sum()
}
