//! Metric specification: error typology, severity system and the scoring
//! parameters (MSV, RWC, PT, APP, range thresholds, optional tolerance curve).
//!
//! A [`MetricSpec`] is plain data. Nothing downstream should score against a
//! spec whose [`MetricSpec::validate`] report is non-empty; the scoring entry
//! points in [`crate::engine`] enforce this.

use std::collections::{HashMap, HashSet};

use rust_decimal::Decimal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nonlinear::ToleranceCurve;

const BUNDLED_CORE_METRIC: &str = include_str!("../data/mqm_core.json");

fn one() -> Decimal {
    Decimal::ONE
}

/// A node of the error typology (an error dimension or one of its subtypes).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ErrorTypeNode {
    pub id: String,
    pub name: String,
    #[serde(default)]
    pub description: String,
    #[serde(default)]
    pub parent_id: Option<String>,
    /// Error type weight.
    #[serde(default = "one")]
    pub weight: Decimal,
}

impl ErrorTypeNode {
    pub fn new(id: impl Into<String>, name: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            name: name.into(),
            description: String::new(),
            parent_id: None,
            weight: Decimal::ONE,
        }
    }

    pub fn with_weight(mut self, weight: Decimal) -> Self {
        self.weight = weight;
        self
    }

    pub fn with_parent(mut self, parent_id: impl Into<String>) -> Self {
        self.parent_id = Some(parent_id.into());
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeverityLevel {
    pub name: String,
    pub multiplier: Decimal,
}

impl SeverityLevel {
    pub fn new(name: impl Into<String>, multiplier: Decimal) -> Self {
        Self {
            name: name.into(),
            multiplier,
        }
    }
}

/// Ordered severity levels, least severe first.
///
/// When `critical_auto_fail` is set, any error at the last (most severe)
/// level forces a FAIL regardless of the score.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeveritySystem {
    pub levels: Vec<SeverityLevel>,
    #[serde(default)]
    pub critical_auto_fail: bool,
}

impl Default for SeveritySystem {
    fn default() -> Self {
        Self {
            levels: vec![
                SeverityLevel::new("Neutral", Decimal::ZERO),
                SeverityLevel::new("Minor", Decimal::ONE),
                SeverityLevel::new("Major", Decimal::from(5)),
                SeverityLevel::new("Critical", Decimal::from(25)),
            ],
            critical_auto_fail: false,
        }
    }
}

impl SeveritySystem {
    pub fn position(&self, name: &str) -> Option<usize> {
        self.levels.iter().position(|l| l.name == name)
    }

    pub fn multiplier(&self, name: &str) -> Result<Decimal> {
        self.levels
            .iter()
            .find(|l| l.name == name)
            .map(|l| l.multiplier)
            .ok_or_else(|| Error::UnknownSeverity(name.to_string()))
    }

    /// The most severe level; the one the auto-fail override watches.
    pub fn critical_level(&self) -> Option<&SeverityLevel> {
        self.levels.last()
    }

    /// Index of the first level that counts as a defect for acceptance
    /// sampling: the level named "Major" (case-insensitive) when present,
    /// otherwise the most severe level.
    pub fn defect_start(&self) -> usize {
        self.levels
            .iter()
            .position(|l| l.name.eq_ignore_ascii_case("major"))
            .unwrap_or(self.levels.len().saturating_sub(1))
    }

    pub fn is_defect(&self, name: &str) -> bool {
        self.position(name).is_some_and(|idx| idx >= self.defect_start())
    }
}

/// Word-count boundaries between the small, medium and large sample ranges,
/// plus the tangent window used to decide whether a linear model is still
/// close enough to its calibration size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RangeThresholds {
    #[serde(default = "RangeThresholds::default_sqc_max")]
    pub sqc_max_words: u64,
    #[serde(default = "RangeThresholds::default_linear_max")]
    pub linear_max_words: u64,
    /// Sample size the linear model was calibrated at; falls back to the RWC.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub calibration_words: Option<u64>,
    /// Relative half-width of the window around the calibration size in which
    /// the linear model is preferred over the curve.
    #[serde(default = "RangeThresholds::default_tangent_window")]
    pub tangent_window: Decimal,
}

impl RangeThresholds {
    fn default_sqc_max() -> u64 {
        250
    }

    fn default_linear_max() -> u64 {
        5000
    }

    fn default_tangent_window() -> Decimal {
        Decimal::new(5, 1)
    }
}

impl Default for RangeThresholds {
    fn default() -> Self {
        Self {
            sqc_max_words: Self::default_sqc_max(),
            linear_max_words: Self::default_linear_max(),
            calibration_words: None,
            tangent_window: Self::default_tangent_window(),
        }
    }
}

/// A complete scoring configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricSpec {
    pub id: String,
    pub typology: Vec<ErrorTypeNode>,
    #[serde(default)]
    pub severity: SeveritySystem,
    /// Maximum score value.
    #[serde(default = "MetricSpec::default_msv")]
    pub msv: Decimal,
    /// Reference word count.
    #[serde(default = "MetricSpec::default_rwc")]
    pub rwc: u64,
    /// Passing threshold on the calibrated scale.
    pub pt: Decimal,
    /// Acceptable penalty points per RWC.
    pub app: Decimal,
    #[serde(default)]
    pub range_thresholds: RangeThresholds,
    #[serde(default)]
    pub curve: Option<ToleranceCurve>,
    #[serde(default = "MetricSpec::default_rounding")]
    pub rounding_decimals: u32,
}

impl MetricSpec {
    fn default_msv() -> Decimal {
        Decimal::ONE_HUNDRED
    }

    fn default_rwc() -> u64 {
        1000
    }

    fn default_rounding() -> u32 {
        2
    }

    /// A spec with default parameters over the given typology.
    pub fn new(id: impl Into<String>, typology: Vec<ErrorTypeNode>, pt: Decimal, app: Decimal) -> Self {
        Self {
            id: id.into(),
            typology,
            severity: SeveritySystem::default(),
            msv: Self::default_msv(),
            rwc: Self::default_rwc(),
            pt,
            app,
            range_thresholds: RangeThresholds::default(),
            curve: None,
            rounding_decimals: Self::default_rounding(),
        }
    }

    pub fn from_json(document: &str) -> Result<Self> {
        Ok(serde_json::from_str(document)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("metric spec serializes")
    }

    /// Defined passing interval, `msv - pt`.
    pub fn dpi(&self) -> Decimal {
        self.msv - self.pt
    }

    pub fn node(&self, id: &str) -> Option<&ErrorTypeNode> {
        self.typology.iter().find(|n| n.id == id)
    }

    /// Sample size the linear model is anchored at.
    pub fn calibration_words(&self) -> u64 {
        self.range_thresholds.calibration_words.unwrap_or(self.rwc)
    }

    pub fn validate(&self) -> ValidationReport {
        validate_metric(self)
    }

    /// Returns `self` if it validates, otherwise every violation as an error.
    pub fn validated(&self) -> Result<&Self> {
        let report = self.validate();
        if report.is_valid() {
            Ok(self)
        } else {
            Err(Error::InvalidMetric(report.violations))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub path: String,
    pub message: String,
}

impl Violation {
    fn new(path: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            path: path.into(),
            message: message.into(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    fn push(&mut self, path: impl Into<String>, message: impl Into<String>) {
        self.violations.push(Violation::new(path, message));
    }
}

/// Checks every invariant of a metric and reports all violations found.
pub fn validate_metric(spec: &MetricSpec) -> ValidationReport {
    let mut report = ValidationReport::default();

    if spec.id.trim().is_empty() {
        report.push("id", "id must not be empty");
    }
    check_typology(&spec.typology, &mut report);
    check_severity(&spec.severity, &mut report);

    if spec.msv <= Decimal::ZERO {
        report.push("msv", "msv must be positive");
    }
    if spec.rwc == 0 {
        report.push("rwc", "rwc must be a positive word count");
    }
    if spec.pt < Decimal::ZERO {
        report.push("pt", "pt must be >= 0");
    }
    if spec.pt >= spec.msv {
        report.push(
            "pt",
            format!(
                "DPI must be positive (msv {} - pt {} = {})",
                spec.msv,
                spec.pt,
                spec.dpi()
            ),
        );
    }
    if spec.app <= Decimal::ZERO {
        report.push("app", "app must be positive");
    }

    let ranges = &spec.range_thresholds;
    if ranges.sqc_max_words == 0 {
        report.push("range_thresholds.sqc_max_words", "sqc_max_words must be positive");
    }
    if ranges.sqc_max_words >= ranges.linear_max_words {
        report.push(
            "range_thresholds",
            format!(
                "sqc_max_words ({}) must be below linear_max_words ({})",
                ranges.sqc_max_words, ranges.linear_max_words
            ),
        );
    }
    if ranges.calibration_words == Some(0) {
        report.push(
            "range_thresholds.calibration_words",
            "calibration_words must be positive",
        );
    }
    if ranges.tangent_window < Decimal::ZERO {
        report.push("range_thresholds.tangent_window", "tangent_window must be >= 0");
    }

    if let Some(curve) = &spec.curve {
        for message in curve.invariant_violations() {
            report.push("curve", message);
        }
    }

    report
}

fn check_typology(typology: &[ErrorTypeNode], report: &mut ValidationReport) {
    if typology.is_empty() {
        report.push("typology", "typology must contain at least one error type");
        return;
    }

    let mut seen = HashSet::new();
    for (i, node) in typology.iter().enumerate() {
        if node.id.trim().is_empty() {
            report.push(format!("typology[{i}].id"), "id must not be empty");
        }
        if !seen.insert(node.id.as_str()) {
            report.push(
                format!("typology[{i}].id"),
                format!("duplicate error type id `{}`", node.id),
            );
        }
        if node.weight < Decimal::ZERO {
            report.push(format!("typology[{i}].weight"), "weight must be >= 0");
        }
    }

    let parents: HashMap<&str, Option<&str>> = typology
        .iter()
        .map(|n| (n.id.as_str(), n.parent_id.as_deref()))
        .collect();

    for (i, node) in typology.iter().enumerate() {
        let Some(parent) = node.parent_id.as_deref() else {
            continue;
        };
        if !parents.contains_key(parent) {
            report.push(
                format!("typology[{i}].parent_id"),
                format!("parent `{parent}` does not exist"),
            );
            continue;
        }
        // A chain longer than the node count must revisit a node.
        let mut current = Some(parent);
        let mut steps = 0;
        while let Some(id) = current {
            steps += 1;
            if id == node.id || steps > typology.len() {
                report.push(
                    format!("typology[{i}].parent_id"),
                    format!("cycle in typology hierarchy through `{}`", node.id),
                );
                break;
            }
            current = parents.get(id).copied().flatten();
        }
    }
}

fn check_severity(severity: &SeveritySystem, report: &mut ValidationReport) {
    if severity.levels.len() < 2 {
        report.push("severity.levels", "at least 2 severity levels are required");
    }
    let mut names = HashSet::new();
    for (i, level) in severity.levels.iter().enumerate() {
        if level.name.trim().is_empty() {
            report.push(format!("severity.levels[{i}].name"), "name must not be empty");
        }
        if !names.insert(level.name.as_str()) {
            report.push(
                format!("severity.levels[{i}].name"),
                format!("duplicate severity level `{}`", level.name),
            );
        }
        if level.multiplier < Decimal::ZERO {
            report.push(format!("severity.levels[{i}].multiplier"), "multiplier must be >= 0");
        }
    }
    for (i, pair) in severity.levels.windows(2).enumerate() {
        if pair[1].multiplier < pair[0].multiplier {
            report.push(
                format!("severity.levels[{}].multiplier", i + 1),
                format!(
                    "multipliers non-decreasing violated: `{}` ({}) is below `{}` ({})",
                    pair[1].name, pair[1].multiplier, pair[0].name, pair[0].multiplier
                ),
            );
        }
    }
}

/// The bundled seven-dimension core metric with default parameters
/// (PT 85, APP 20 per 1000 words).
pub fn default_core_metric() -> Result<MetricSpec> {
    MetricSpec::from_json(BUNDLED_CORE_METRIC).map_err(|e| Error::Config(format!("bundled core metric: {e}")))
}
