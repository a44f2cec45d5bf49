//! Chooses the measurement method from the evaluated sample size.
//!
//! | range | words                                   | method                                  |
//! |-------|-----------------------------------------|-----------------------------------------|
//! | RS    | `ewc <= sqc_max_words`                  | acceptance sampling                     |
//! | RM    | `sqc_max_words < ewc <= linear_max_words` | linear near the calibration size, else the curve |
//! | RL    | `ewc > linear_max_words`                | curve                                   |
//!
//! Where the curve is preferred but absent the linear model is used with a warning.

use std::fmt;

use rust_decimal::Decimal;
use serde::{Deserialize, Serialize};

use crate::metric::MetricSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Method {
    Sqc,
    Linear,
    Nonlinear,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Sqc => "SQC",
            Method::Linear => "LINEAR",
            Method::Nonlinear => "NONLINEAR",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum SizeRange {
    #[serde(rename = "RS")]
    Small,
    #[serde(rename = "RM")]
    Medium,
    #[serde(rename = "RL")]
    Large,
}

impl fmt::Display for SizeRange {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SizeRange::Small => "RS",
            SizeRange::Medium => "RM",
            SizeRange::Large => "RL",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MethodSelection {
    pub method: Method,
    pub range: SizeRange,
    pub rationale: String,
    #[serde(default)]
    pub warnings: Vec<String>,
}

pub fn size_range(ewc: u64, spec: &MetricSpec) -> SizeRange {
    let thresholds = &spec.range_thresholds;
    if ewc <= thresholds.sqc_max_words {
        SizeRange::Small
    } else if ewc <= thresholds.linear_max_words {
        SizeRange::Medium
    } else {
        SizeRange::Large
    }
}

/// Whether `ewc` lies within the tangent window around the calibration size.
pub fn near_calibration_point(ewc: u64, spec: &MetricSpec) -> bool {
    let anchor = spec.calibration_words();
    let distance = Decimal::from(ewc.abs_diff(anchor));
    distance <= spec.range_thresholds.tangent_window * Decimal::from(anchor)
}

pub fn select_method(ewc: u64, spec: &MetricSpec) -> MethodSelection {
    let range = size_range(ewc, spec);
    let thresholds = &spec.range_thresholds;
    let has_curve = spec.curve.is_some();
    let anchor = spec.calibration_words();

    let (method, rationale, warnings) = match range {
        SizeRange::Small => (
            Method::Sqc,
            format!(
                "{ewc} words is at most {} words: too small for analytic scoring, use acceptance sampling",
                thresholds.sqc_max_words
            ),
            Vec::new(),
        ),
        SizeRange::Medium if near_calibration_point(ewc, spec) => (
            Method::Linear,
            format!("{ewc} words is within the tangent window of the {anchor}-word calibration point"),
            Vec::new(),
        ),
        SizeRange::Medium if has_curve => (
            Method::Nonlinear,
            format!("{ewc} words is outside the tangent window of the {anchor}-word calibration point"),
            Vec::new(),
        ),
        SizeRange::Medium => (
            Method::Linear,
            format!("{ewc} words is in the medium range; no tolerance curve is configured"),
            vec![format!(
                "linear calibration is anchored at {anchor} words and loses accuracy at {ewc} words; fit a tolerance curve"
            )],
        ),
        SizeRange::Large if has_curve => (
            Method::Nonlinear,
            format!("{ewc} words exceeds {} words: non-linear tolerance applies", thresholds.linear_max_words),
            Vec::new(),
        ),
        SizeRange::Large => (
            Method::Linear,
            format!("{ewc} words exceeds {} words; no tolerance curve is configured", thresholds.linear_max_words),
            vec![format!(
                "OUT OF VALIDITY: linear scoring is not valid above {} words; the score is likely too lenient",
                thresholds.linear_max_words
            )],
        ),
    };

    MethodSelection {
        method,
        range,
        rationale,
        warnings,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metric::default_core_metric;
    use crate::nonlinear::ToleranceCurve;

    fn with_curve() -> MetricSpec {
        let mut spec = default_core_metric().unwrap();
        spec.curve = Some(ToleranceCurve::new(4.0, -15.0, 300, 20_000));
        spec
    }

    #[test]
    fn spec_examples() {
        let spec = default_core_metric().unwrap();
        let s = select_method(250, &spec);
        assert_eq!((s.method, s.range), (Method::Sqc, SizeRange::Small));
        let s = select_method(2000, &spec);
        assert_eq!((s.method, s.range), (Method::Linear, SizeRange::Medium));
        assert_eq!(s.warnings.len(), 1);
        let s = select_method(8000, &with_curve());
        assert_eq!((s.method, s.range), (Method::Nonlinear, SizeRange::Large));
    }

    #[test]
    fn boundaries() {
        let spec = default_core_metric().unwrap();
        assert_eq!(select_method(1, &spec).range, SizeRange::Small);
        assert_eq!(select_method(251, &spec).range, SizeRange::Medium);
        assert_eq!(select_method(5000, &spec).range, SizeRange::Medium);
        assert_eq!(select_method(5001, &spec).range, SizeRange::Large);
    }

    #[test]
    fn tangent_window() {
        let spec = with_curve();
        assert_eq!(select_method(500, &spec).method, Method::Linear);
        assert_eq!(select_method(1500, &spec).method, Method::Linear);
        assert_eq!(select_method(499, &spec).method, Method::Nonlinear);
        assert_eq!(select_method(1501, &spec).method, Method::Nonlinear);
    }

    #[test]
    fn large_without_curve_warns() {
        let spec = default_core_metric().unwrap();
        let s = select_method(8000, &spec);
        assert_eq!((s.method, s.range), (Method::Linear, SizeRange::Large));
        assert!(s.warnings[0].contains("OUT OF VALIDITY"));
    }

    #[test]
    fn custom_calibration_point() {
        let mut spec = with_curve();
        spec.range_thresholds.calibration_words = Some(4000);
        assert_eq!(select_method(1000, &spec).method, Method::Nonlinear);
        assert_eq!(select_method(3000, &spec).method, Method::Linear);
    }
}
