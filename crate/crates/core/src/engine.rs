//! End-to-end scoring of one sample against one metric.

use std::fmt::{self, Write as _};
use std::str::FromStr;

use rust_decimal::{Decimal, RoundingStrategy};
use serde::{Deserialize, Serialize};

use crate::annotation::EvaluationSample;
use crate::error::{Error, Result};
use crate::linear::{self, PenaltyBreakdown, Rating};
use crate::metric::MetricSpec;
use crate::nonlinear;
use crate::router::{self, Method, MethodSelection};
use crate::sqc::{self, InspectionUnit};

/// Which model the caller asks for.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelChoice {
    Raw,
    Calibrated,
    Nonlinear,
    /// Let the range router decide.
    #[default]
    Auto,
}

impl FromStr for ModelChoice {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "raw" => Ok(Self::Raw),
            "calibrated" => Ok(Self::Calibrated),
            "nonlinear" => Ok(Self::Nonlinear),
            "auto" => Ok(Self::Auto),
            other => Err(Error::Precondition(format!(
                "unknown model `{other}` (expected raw, calibrated, nonlinear or auto)"
            ))),
        }
    }
}

/// The model whose score decided the rating.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum ScoringModel {
    Raw,
    Calibrated,
    Nonlinear,
}

impl fmt::Display for ScoringModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ScoringModel::Raw => "RAW",
            ScoringModel::Calibrated => "CALIBRATED",
            ScoringModel::Nonlinear => "NONLINEAR",
        })
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScoreOptions {
    #[serde(default)]
    pub model: ModelChoice,
    /// Allow the tolerance curve to be evaluated outside its surveyed range.
    #[serde(default)]
    pub extrapolate: bool,
}

/// What to do with a sample too small for analytic scoring.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SqcGuidance {
    pub unit: InspectionUnit,
    pub units_inspected: u64,
    /// Errors at Major severity or above.
    pub defects: u64,
    pub message: String,
}

/// Scores rounded for display.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DisplayValues {
    pub npt: Decimal,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub raw_score: Option<Decimal>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub calibrated_score: Option<Decimal>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nonlinear_score: Option<Decimal>,
}

/// Every intermediate value of a scoring run. Score fields are unrounded;
/// `display` carries the rounded copies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreReport {
    pub sample_id: String,
    pub metric_id: String,
    pub ewc: u64,
    pub rwc: u64,
    pub breakdown: PenaltyBreakdown,
    pub scaling_factor: Decimal,
    pub raw_passing_threshold: Decimal,
    pub raw_score: Option<Decimal>,
    pub calibrated_score: Option<Decimal>,
    pub nonlinear_score: Option<Decimal>,
    /// Curve tolerance `T(ewc)` the non-linear score was measured against.
    pub tolerance: Option<f64>,
    /// Threshold the selected score was compared with.
    pub passing_threshold: Option<Decimal>,
    pub critical_count: u64,
    pub rating: Option<Rating>,
    pub model_used: Option<ScoringModel>,
    pub method: MethodSelection,
    pub sqc: Option<SqcGuidance>,
    pub display: DisplayValues,
    pub warnings: Vec<String>,
}

impl ScoreReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("score report serializes")
    }

    pub fn from_json(document: &str) -> Result<Self> {
        Ok(serde_json::from_str(document)?)
    }

    /// The score that decided the rating.
    pub fn selected_score(&self) -> Option<Decimal> {
        match self.model_used? {
            ScoringModel::Raw => self.raw_score,
            ScoringModel::Calibrated => self.calibrated_score,
            ScoringModel::Nonlinear => self.nonlinear_score,
        }
    }
}

/// Half-away-from-zero rounding used for every displayed value.
pub fn round_display(value: Decimal, decimals: u32) -> Decimal {
    value.round_dp_with_strategy(decimals, RoundingStrategy::MidpointAwayFromZero)
}

pub fn score_sample(sample: &EvaluationSample, spec: &MetricSpec, options: ScoreOptions) -> Result<ScoreReport> {
    spec.validated()?;
    let breakdown = linear::penalty_breakdown(sample, spec)?;
    let selection = router::select_method(sample.ewc, spec);
    let critical_count = linear::critical_count(sample, spec);
    let mut warnings = Vec::new();

    let model = match options.model {
        ModelChoice::Auto => {
            warnings.extend(selection.warnings.iter().cloned());
            match selection.method {
                Method::Sqc => None,
                Method::Linear => Some(ScoringModel::Calibrated),
                Method::Nonlinear => Some(ScoringModel::Nonlinear),
            }
        }
        explicit => {
            let model = match explicit {
                ModelChoice::Raw => ScoringModel::Raw,
                ModelChoice::Calibrated => ScoringModel::Calibrated,
                _ => ScoringModel::Nonlinear,
            };
            let routed_here = matches!(
                (selection.method, model),
                (Method::Linear, ScoringModel::Raw | ScoringModel::Calibrated)
                    | (Method::Nonlinear, ScoringModel::Nonlinear)
            );
            if !routed_here {
                warnings.push(format!(
                    "{model} model requested, but {} words routes to {} ({})",
                    sample.ewc, selection.method, selection.range
                ));
            }
            Some(model)
        }
    };

    let (mut raw_score, mut calibrated_score, mut nonlinear_score, mut tolerance) = (None, None, None, None);
    let mut sqc_guidance = None;

    if let Some(model) = model {
        let raw = linear::raw_score(&breakdown, spec);
        let calibrated = linear::calibrated_score(&breakdown, spec)?;
        if raw < Decimal::ZERO {
            warnings.push("raw score is below zero: the sample carries more penalty points than words".into());
        }
        if calibrated < Decimal::ZERO && model == ScoringModel::Calibrated {
            warnings.push("calibrated score is below zero".into());
        }
        raw_score = Some(raw);
        calibrated_score = Some(calibrated);

        let wants_curve = model == ScoringModel::Nonlinear;
        let curve_usable = spec
            .curve
            .as_ref()
            .is_some_and(|c| c.contains(sample.ewc) || options.extrapolate);
        if wants_curve || curve_usable {
            match nonlinear::nonlinear_score(&breakdown, sample.ewc, spec, options.extrapolate) {
                Ok(outcome) => {
                    warnings.extend(outcome.warning);
                    nonlinear_score = Some(outcome.score);
                    tolerance = Some(outcome.tolerance);
                }
                Err(err) if wants_curve => return Err(err),
                // Informational only when another model decides.
                Err(_) => {}
            }
        }
    } else {
        let unit = InspectionUnit::default();
        let units_inspected = sqc::inspection_units(sample.ewc, unit, sqc::WORDS_PER_SENTENCE);
        let defects = sqc::defect_count(sample, spec);
        sqc_guidance = Some(SqcGuidance {
            unit,
            units_inspected,
            defects,
            message: format!(
                "{} words (about {units_inspected} sentences) is too small for an analytic quality score; \
                 judge it with an acceptance-sampling plan: compare the {defects} Major-or-above defects \
                 against the plan's acceptance number",
                sample.ewc
            ),
        });
    }

    let (selected, threshold) = match model {
        Some(ScoringModel::Raw) => (raw_score, Some(linear::raw_passing_threshold(spec))),
        Some(ScoringModel::Calibrated) => (calibrated_score, Some(spec.pt)),
        Some(ScoringModel::Nonlinear) => (nonlinear_score, Some(spec.pt)),
        None => (None, None),
    };
    let rating = selected.zip(threshold).map(|(score, threshold)| {
        linear::rate_against(score, threshold, spec.severity.critical_auto_fail, critical_count)
    });
    if spec.severity.critical_auto_fail && critical_count > 0 && rating.is_some() {
        warnings.push(format!("{critical_count} critical error(s): automatic FAIL"));
    }

    let dp = spec.rounding_decimals;
    let display = DisplayValues {
        npt: round_display(breakdown.npt, dp),
        raw_score: raw_score.map(|v| round_display(v, dp)),
        calibrated_score: calibrated_score.map(|v| round_display(v, dp)),
        nonlinear_score: nonlinear_score.map(|v| round_display(v, dp)),
    };

    Ok(ScoreReport {
        sample_id: sample.id.clone(),
        metric_id: spec.id.clone(),
        ewc: sample.ewc,
        rwc: spec.rwc,
        scaling_factor: linear::scaling_factor(spec)?,
        raw_passing_threshold: linear::raw_passing_threshold(spec),
        breakdown,
        raw_score,
        calibrated_score,
        nonlinear_score,
        tolerance,
        passing_threshold: threshold,
        critical_count,
        rating,
        model_used: model,
        method: selection,
        sqc: sqc_guidance,
        display,
        warnings,
    })
}

/// Human-readable summary of the scorecard totals.
pub fn render_table(report: &ScoreReport, rounding_decimals: u32) -> String {
    let dp = rounding_decimals;
    let fmt_dec = |v: Decimal| format!("{:.*}", dp as usize, round_display(v, dp));
    let mut out = String::new();
    let mut row = |label: &str, value: String| {
        let _ = writeln!(out, "{label:<24}{value}");
    };

    row("Sample", format!("{} ({} words)", report.sample_id, report.ewc));
    row("Metric", report.metric_id.clone());
    for (error_type, etpt) in &report.breakdown.etpt_by_type {
        row(&format!("  {error_type}"), fmt_dec(*etpt));
    }
    row("Absolute penalty total", fmt_dec(report.breakdown.apt));
    row("Per-word penalty total", report.breakdown.pwpt.normalize().to_string());
    row(
        &format!("Normed penalty (/{})", report.rwc),
        fmt_dec(report.breakdown.npt),
    );
    row("Scaling factor", report.scaling_factor.normalize().to_string());
    if let Some(v) = report.raw_score {
        row("Raw score", fmt_dec(v));
    }
    if let Some(v) = report.calibrated_score {
        row("Calibrated score", fmt_dec(v));
    }
    if let Some(v) = report.nonlinear_score {
        row("Non-linear score", fmt_dec(v));
    }
    row("Method", format!("{} ({})", report.method.method, report.method.range));
    if let Some(model) = report.model_used {
        row("Model", model.to_string());
    }
    if let Some(threshold) = report.passing_threshold {
        row("Passing threshold", fmt_dec(threshold));
    }
    row(
        "Rating",
        report
            .rating
            .map_or_else(|| "n/a (acceptance sampling)".to_string(), |r| r.to_string()),
    );
    if let Some(sqc) = &report.sqc {
        row("Defects (Major+)", sqc.defects.to_string());
        row("Guidance", sqc.message.clone());
    }
    for warning in &report.warnings {
        row("Warning", warning.clone());
    }
    out
}
