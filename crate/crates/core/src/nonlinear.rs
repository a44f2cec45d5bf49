//! Non-linear scoring with a logarithmic error-tolerance curve.
//!
//! Quality managers answer an extended calibration questionnaire: how many
//! penalty points are still acceptable for samples of several sizes. The
//! answers are fitted by least squares to `T(n) = a * ln(n) + b`, and a sample
//! of `n` words is scored as `msv - apt * dpi / T(n)`. At `apt == T(n)` the
//! score is exactly the passing threshold.
//!
//! Curve parameters are `f64`; scores are handed back as [`Decimal`] so they
//! compare directly with the linear models.

use rust_decimal::prelude::ToPrimitive;
use rust_decimal::Decimal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linear::PenaltyBreakdown;
use crate::metric::MetricSpec;

/// Words per page when questionnaire answers are given in pages.
pub const WORDS_PER_PAGE: u64 = 250;

/// Points sampled across the validity range for the per-word tolerance check.
const MONOTONICITY_GRID: usize = 512;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TolerancePoint {
    pub sample_words: u64,
    /// Acceptable penalty points for a sample of that size (absolute, not normed).
    pub acceptable_penalty_points: f64,
}

impl TolerancePoint {
    pub fn new(sample_words: u64, acceptable_penalty_points: f64) -> Self {
        Self {
            sample_words,
            acceptable_penalty_points,
        }
    }

    fn check(&self) -> Result<()> {
        if self.sample_words < 1 {
            return Err(Error::invalid("tolerance point", "sample_words must be ≥ 1"));
        }
        if !(self.acceptable_penalty_points.is_finite() && self.acceptable_penalty_points > 0.0) {
            return Err(Error::invalid(
                "tolerance point",
                format!(
                    "acceptable_penalty_points must be positive (got {} at {} words)",
                    self.acceptable_penalty_points, self.sample_words
                ),
            ));
        }
        Ok(())
    }
}

/// Fitted tolerance curve `T(n) = a * ln(n) + b` in penalty points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToleranceCurve {
    pub a: f64,
    pub b: f64,
    pub valid_from: u64,
    pub valid_to: u64,
    /// Sum of squared residuals of the fit.
    pub fit_residual: f64,
    #[serde(default)]
    pub source_points: Vec<TolerancePoint>,
    /// Non-fatal findings about the fitted shape.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub diagnostics: Vec<String>,
}

/// A tolerance value, possibly extrapolated beyond the surveyed sizes.
#[derive(Debug, Clone, PartialEq)]
pub struct Tolerance {
    pub points: f64,
    pub warning: Option<String>,
}

impl ToleranceCurve {
    /// A curve with the given shape and validity range and no source data.
    pub fn new(a: f64, b: f64, valid_from: u64, valid_to: u64) -> Self {
        Self {
            a,
            b,
            valid_from,
            valid_to,
            fit_residual: 0.0,
            source_points: Vec::new(),
            diagnostics: Vec::new(),
        }
    }

    /// `a * ln(n) + b`, evaluated for any positive real `n` without range checks.
    pub fn tolerance_at(&self, n: f64) -> f64 {
        self.a * n.ln() + self.b
    }

    pub fn contains(&self, words: u64) -> bool {
        (self.valid_from..=self.valid_to).contains(&words)
    }

    /// Tolerance for a sample of `words` words. Outside the validity range
    /// this fails unless `extrapolate` is set, in which case the value carries
    /// a warning.
    pub fn tolerance_for(&self, words: u64, extrapolate: bool) -> Result<Tolerance> {
        if words == 0 {
            return Err(Error::Precondition("word count must be positive".into()));
        }
        let points = self.tolerance_at(words as f64);
        if self.contains(words) {
            return Ok(Tolerance { points, warning: None });
        }
        if !extrapolate {
            return Err(Error::OutOfRange {
                words,
                from: self.valid_from,
                to: self.valid_to,
            });
        }
        Ok(Tolerance {
            points,
            warning: Some(format!(
                "tolerance extrapolated to {words} words outside the surveyed range [{}, {}]",
                self.valid_from, self.valid_to
            )),
        })
    }

    /// Whether `T(n) / n` strictly decreases over a log-spaced grid spanning
    /// the validity range.
    pub fn per_word_tolerance_decreasing(&self) -> bool {
        let grid = validity_grid(self.valid_from, self.valid_to);
        grid.windows(2)
            .all(|w| self.tolerance_at(w[1]) / w[1] < self.tolerance_at(w[0]) / w[0])
    }

    /// Hard invariant failures; empty for a usable curve.
    pub fn invariant_violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        if !(self.a.is_finite() && self.b.is_finite()) {
            out.push("curve parameters must be finite".to_string());
            return out;
        }
        if self.a <= 0.0 {
            out.push(format!("slope a must be positive (got {})", self.a));
        }
        if self.valid_from < 1 {
            out.push("valid_from must be ≥ 1".to_string());
        }
        if self.valid_from > self.valid_to {
            out.push(format!(
                "valid_from ({}) exceeds valid_to ({})",
                self.valid_from, self.valid_to
            ));
        }
        if !(self.fit_residual.is_finite() && self.fit_residual >= 0.0) {
            out.push("fit_residual must be a non-negative number".to_string());
        }
        if self.valid_from >= 1 && self.valid_from <= self.valid_to {
            // With a > 0, T is increasing, so its minimum is at valid_from.
            let low = self.tolerance_at(self.valid_from as f64);
            let high = self.tolerance_at(self.valid_to as f64);
            if low <= 0.0 || high <= 0.0 {
                out.push(format!(
                    "T(n) must be positive on [{}, {}] (T({}) = {low})",
                    self.valid_from, self.valid_to, self.valid_from
                ));
            }
        }
        out
    }
}

fn validity_grid(from: u64, to: u64) -> Vec<f64> {
    let (lo, hi) = (from.max(1) as f64, to.max(1) as f64);
    if lo >= hi {
        return vec![lo];
    }
    let ratio = (hi / lo).ln() / (MONOTONICITY_GRID - 1) as f64;
    let mut grid: Vec<f64> = (0..MONOTONICITY_GRID)
        .map(|i| (lo * (ratio * i as f64).exp()).round())
        .collect();
    grid[0] = lo;
    grid[MONOTONICITY_GRID - 1] = hi;
    grid.dedup();
    grid
}

/// Least-squares fit of `acceptable_penalty_points` against `ln(sample_words)`.
///
/// The validity range spans the smallest to largest surveyed size. Fails
/// when fewer than two distinct sizes are given, when the slope is not
/// positive, or when the curve is not positive over its range. A per-word
/// tolerance that does not strictly decrease is reported in `diagnostics`.
pub fn fit_tolerance_curve(points: &[TolerancePoint]) -> Result<ToleranceCurve> {
    for point in points {
        point.check()?;
    }
    let mut sizes: Vec<u64> = points.iter().map(|p| p.sample_words).collect();
    sizes.sort_unstable();
    sizes.dedup();
    if sizes.len() < 2 {
        return Err(Error::Precondition("≥ 2 distinct sample sizes required".into()));
    }

    let count = points.len() as f64;
    let xs: Vec<f64> = points.iter().map(|p| (p.sample_words as f64).ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.acceptable_penalty_points).collect();
    let mean_x = xs.iter().sum::<f64>() / count;
    let mean_y = ys.iter().sum::<f64>() / count;
    let (mut sxx, mut sxy) = (0.0, 0.0);
    for (x, y) in xs.iter().zip(&ys) {
        sxx += (x - mean_x) * (x - mean_x);
        sxy += (x - mean_x) * (y - mean_y);
    }
    let a = sxy / sxx;
    let b = mean_y - a * mean_x;
    let fit_residual = sum_squared_residuals(points, a, b);

    let mut curve = ToleranceCurve {
        a,
        b,
        valid_from: sizes[0],
        valid_to: sizes[sizes.len() - 1],
        fit_residual,
        source_points: points.to_vec(),
        diagnostics: Vec::new(),
    };
    if a <= 0.0 {
        return Err(Error::Fit(format!(
            "fitted slope a = {a} is not positive; tolerance must grow with sample size"
        )));
    }
    if let Some(message) = curve.invariant_violations().into_iter().next() {
        return Err(Error::Fit(message));
    }
    if !curve.per_word_tolerance_decreasing() {
        curve.diagnostics.push(format!(
            "per-word tolerance T(n)/n is not strictly decreasing on [{}, {}]; it rises until T(n) = a, near n = {:.0}",
            curve.valid_from,
            curve.valid_to,
            (1.0 - b / a).exp()
        ));
    }
    Ok(curve)
}

/// Sum of squared residuals of `points` against `a * ln(n) + b`.
pub fn sum_squared_residuals(points: &[TolerancePoint], a: f64, b: f64) -> f64 {
    points
        .iter()
        .map(|p| {
            let r = p.acceptable_penalty_points - (a * (p.sample_words as f64).ln() + b);
            r * r
        })
        .sum()
}

fn to_decimal(value: f64, what: &str) -> Result<Decimal> {
    Decimal::try_from(value).map_err(|_| Error::Precondition(format!("{what} {value} is not representable")))
}

/// Outcome of non-linear scoring: the unrounded score, the tolerance it was
/// measured against, and a warning when that tolerance was extrapolated.
#[derive(Debug, Clone, PartialEq)]
pub struct NonlinearScore {
    pub score: Decimal,
    pub tolerance: f64,
    pub warning: Option<String>,
}

/// `msv - apt * dpi / T(ewc)`.
pub fn nonlinear_score(
    breakdown: &PenaltyBreakdown,
    ewc: u64,
    spec: &MetricSpec,
    extrapolate: bool,
) -> Result<NonlinearScore> {
    let curve = spec
        .curve
        .as_ref()
        .ok_or_else(|| Error::Precondition("metric has no tolerance curve".into()))?;
    let tolerance = curve.tolerance_for(ewc, extrapolate)?;
    if tolerance.points <= 0.0 {
        return Err(Error::Fit(format!(
            "tolerance at {ewc} words is {} penalty points; the curve is not usable there",
            tolerance.points
        )));
    }
    let t = to_decimal(tolerance.points, "tolerance")?;
    let penalty = breakdown
        .apt
        .checked_mul(spec.dpi())
        .ok_or_else(|| Error::invalid("sample", "penalty arithmetic overflows the decimal range"))?;
    Ok(NonlinearScore {
        score: spec.msv - penalty / t,
        tolerance: tolerance.points,
        warning: tolerance.warning,
    })
}

/// The APP that makes the linear calibrated model agree with the curve at a
/// sample size of `standard_sample_words`: `T(n*) * rwc / n*`.
pub fn linear_equivalent_app(curve: &ToleranceCurve, standard_sample_words: u64, rwc: u64) -> Result<Decimal> {
    let tolerance = curve.tolerance_for(standard_sample_words, false)?;
    let t = to_decimal(tolerance.points, "tolerance")?;
    Ok(t * Decimal::from(rwc) / Decimal::from(standard_sample_words))
}

#[derive(Deserialize)]
#[serde(untagged)]
enum PointsDocument {
    Bare(Vec<TolerancePoint>),
    Wrapped { points: Vec<TolerancePoint> },
}

/// Reads questionnaire answers.
///
/// Accepts JSON (a list of points, or `{"points": [...]}`) or CSV with header
/// `sample_words,acceptable_penalty_points`, or `sample_pages,acceptable_major_errors`
/// where pages are converted at 250 words per page and major errors at
/// `major_multiplier` penalty points each.
pub fn load_questionnaire(document: &str, major_multiplier: Decimal) -> Result<Vec<TolerancePoint>> {
    let trimmed = document.trim_start();
    if trimmed.starts_with('[') || trimmed.starts_with('{') {
        let points = match serde_json::from_str(document)? {
            PointsDocument::Bare(points) | PointsDocument::Wrapped { points } => points,
        };
        return Ok(points);
    }

    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(document.as_bytes());
    let headers: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    let in_pages = match headers.iter().map(String::as_str).collect::<Vec<_>>().as_slice() {
        ["sample_words", "acceptable_penalty_points"] => false,
        ["sample_pages", "acceptable_major_errors"] => true,
        other => {
            return Err(Error::Malformed(format!(
                "unexpected questionnaire header `{}`",
                other.join(",")
            )))
        }
    };
    let multiplier = major_multiplier
        .to_f64()
        .ok_or_else(|| Error::Precondition("major multiplier is not representable".into()))?;

    let mut points = Vec::new();
    for (row, record) in reader.records().enumerate() {
        let record = record?;
        let line = row + 2;
        let field = |i: usize| -> Result<f64> {
            record
                .get(i)
                .and_then(|v| v.parse::<f64>().ok())
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::Malformed(format!("line {line}: field {} is not a number", i + 1)))
        };
        let (size, tolerance) = (field(0)?, field(1)?);
        let point = if in_pages {
            let words = (size * WORDS_PER_PAGE as f64).round();
            TolerancePoint::new(words.max(0.0) as u64, tolerance * multiplier)
        } else {
            if size < 0.0 || size.fract() != 0.0 {
                return Err(Error::Malformed(format!(
                    "line {line}: sample_words must be a whole number"
                )));
            }
            TolerancePoint::new(size as u64, tolerance)
        };
        points.push(point);
    }
    Ok(points)
}
