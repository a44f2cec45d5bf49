//! Translation quality scoring in the MQM style.
//!
//! * [`metric`]: typology, severities and scoring parameters, with validation.
//! * [`annotation`]: evaluation samples (word count plus error counts).
//! * [`linear`]: penalty totals, raw and calibrated scores, rating.
//! * [`nonlinear`]: logarithmic tolerance curves and the non-linear score.
//! * [`sqc`]: binomial acceptance sampling for very small samples.
//! * [`router`]: picks the method from the sample size.
//! * [`calibration`]: replays historical judgments against candidate metrics.
//! * [`engine`]: the full scoring pipeline and its report.

#[cfg(test)]
macro_rules! dec {
    (- $v:literal) => {
        -<rust_decimal::Decimal as std::str::FromStr>::from_str(stringify!($v)).unwrap()
    };
    ($v:literal) => {
        <rust_decimal::Decimal as std::str::FromStr>::from_str(stringify!($v)).unwrap()
    };
}

pub mod annotation;
pub mod calibration;
pub mod engine;
pub mod error;
pub mod linear;
pub mod metric;
pub mod nonlinear;
pub mod router;
pub mod sqc;

pub use annotation::{load_sample, merge_samples, ErrorCountCell, EvaluationSample};
pub use calibration::{
    average_failure_threshold, load_history, replay, CalibrationSession, Confusion, HistoricalEvaluation, ReplayResult,
};
pub use engine::{score_sample, ModelChoice, ScoreOptions, ScoreReport, ScoringModel};
pub use error::{Error, Result};
pub use linear::{PenaltyBreakdown, Rating};
pub use metric::{default_core_metric, validate_metric, ErrorTypeNode, MetricSpec, SeveritySystem, ValidationReport};
pub use nonlinear::{fit_tolerance_curve, ToleranceCurve, TolerancePoint};
pub use router::{select_method, Method, MethodSelection, SizeRange};
pub use rust_decimal::Decimal;
pub use sqc::{acceptance_probability, find_plan, oc_curve, InspectionUnit, SamplingPlan};
