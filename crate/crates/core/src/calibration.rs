//! Replaying historical evaluations against candidate metrics.
//!
//! Each historical evaluation pairs error counts with the evaluator's holistic
//! PASS/FAIL judgment, made independently of the counts. A candidate metric
//! is judged by how often its computed rating agrees with those judgments.

use std::collections::HashMap;
use std::fmt::Write as _;

use rayon::prelude::*;
use rust_decimal::Decimal;
use serde::{Deserialize, Serialize};

use crate::annotation::{ErrorCountCell, EvaluationSample};
use crate::engine::{score_sample, ModelChoice, ScoreOptions, ScoringModel};
use crate::error::{Error, Result};
use crate::linear::{penalty_breakdown, Rating};
use crate::metric::MetricSpec;

pub const HISTORY_HEADER: [&str; 6] = [
    "sample_id",
    "ewc",
    "holistic_rating",
    "error_type_id",
    "severity",
    "count",
];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HistoricalEvaluation {
    pub sample: EvaluationSample,
    pub holistic_rating: Rating,
}

/// Counts keyed `<holistic>_<computed>`: `fail_pass` is a sample the
/// evaluator failed but the candidate passed.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub pass_pass: u64,
    pub pass_fail: u64,
    pub fail_pass: u64,
    pub fail_fail: u64,
}

impl Confusion {
    fn record(&mut self, holistic: Rating, computed: Rating) {
        match (holistic, computed) {
            (Rating::Pass, Rating::Pass) => self.pass_pass += 1,
            (Rating::Pass, Rating::Fail) => self.pass_fail += 1,
            (Rating::Fail, Rating::Pass) => self.fail_pass += 1,
            (Rating::Fail, Rating::Fail) => self.fail_fail += 1,
        }
    }

    pub fn total(&self) -> u64 {
        self.pass_pass + self.pass_fail + self.fail_pass + self.fail_fail
    }

    pub fn agreement(&self) -> f64 {
        match self.total() {
            0 => 0.0,
            total => (self.pass_pass + self.fail_fail) as f64 / total as f64,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleOutcome {
    pub sample_id: String,
    pub computed: Rating,
    pub holistic: Rating,
    pub score: Decimal,
    pub model: ScoringModel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplayResult {
    pub candidate_id: String,
    pub agreement: f64,
    pub confusion: Confusion,
    pub per_sample: Vec<SampleOutcome>,
}

/// A stored calibration exercise: the history, the candidates tried, and
/// what the replay found.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalibrationSession {
    pub id: String,
    pub history: Vec<HistoricalEvaluation>,
    pub candidates: Vec<MetricSpec>,
    #[serde(default)]
    pub results: Vec<ReplayResult>,
}

fn replay_one(evaluations: &[HistoricalEvaluation], candidate: &MetricSpec) -> Result<ReplayResult> {
    candidate.validated()?;
    let mut confusion = Confusion::default();
    let mut per_sample = Vec::with_capacity(evaluations.len());

    for evaluation in evaluations {
        let sample = &evaluation.sample;
        let mut report = score_sample(sample, candidate, ScoreOptions::default())?;
        if report.rating.is_none() {
            // Too small for analytic scoring; judge it by the calibrated score.
            report = score_sample(
                sample,
                candidate,
                ScoreOptions {
                    model: ModelChoice::Calibrated,
                    extrapolate: false,
                },
            )?;
        }
        let (Some(computed), Some(score), Some(model)) = (report.rating, report.selected_score(), report.model_used)
        else {
            unreachable!("an explicit model always yields a rating");
        };
        confusion.record(evaluation.holistic_rating, computed);
        per_sample.push(SampleOutcome {
            sample_id: sample.id.clone(),
            computed,
            holistic: evaluation.holistic_rating,
            score,
            model,
        });
    }

    Ok(ReplayResult {
        candidate_id: candidate.id.clone(),
        agreement: confusion.agreement(),
        confusion,
        per_sample,
    })
}

/// Scores every evaluation under every candidate, each with the method the
/// range router picks for that sample size. Candidates run in parallel;
/// results come back in candidate order.
pub fn replay(evaluations: &[HistoricalEvaluation], candidates: &[MetricSpec]) -> Result<Vec<ReplayResult>> {
    if evaluations.is_empty() {
        return Err(Error::Precondition(
            "replay needs at least one historical evaluation".into(),
        ));
    }
    candidates
        .par_iter()
        .map(|candidate| {
            replay_one(evaluations, candidate).map_err(|err| match err {
                Error::UnknownErrorType(_) | Error::UnknownSeverity(_) => Error::invalid(
                    "history",
                    format!("incompatible with candidate `{}`: {err}", candidate.id),
                ),
                other => other,
            })
        })
        .collect()
}

/// Mean normed penalty total over the evaluations the evaluators failed;
/// a starting point for choosing the APP.
pub fn average_failure_threshold(evaluations: &[HistoricalEvaluation], spec: &MetricSpec) -> Result<Decimal> {
    let mut total = Decimal::ZERO;
    let mut count = 0u32;
    for evaluation in evaluations.iter().filter(|e| e.holistic_rating == Rating::Fail) {
        total += penalty_breakdown(&evaluation.sample, spec)?.npt;
        count += 1;
    }
    if count == 0 {
        return Err(Error::Precondition(
            "no holistically failed evaluations in the history".into(),
        ));
    }
    Ok(total / Decimal::from(count))
}

fn parse_rating(value: &str, line: usize) -> Result<Rating> {
    match value.to_ascii_uppercase().as_str() {
        "PASS" => Ok(Rating::Pass),
        "FAIL" => Ok(Rating::Fail),
        _ => Err(Error::Malformed(format!(
            "line {line}: holistic_rating must be PASS or FAIL, got `{value}`"
        ))),
    }
}

/// Reads a history from JSON (a list of evaluations) or from CSV with header
/// `sample_id,ewc,holistic_rating,error_type_id,severity,count`, one row per
/// cell. A sample without errors is a single row with the last three fields
/// empty. Samples keep the order of their first row.
pub fn load_history(document: &str) -> Result<Vec<HistoricalEvaluation>> {
    if document.trim_start().starts_with('[') {
        let history: Vec<HistoricalEvaluation> = serde_json::from_str(document)?;
        for evaluation in &history {
            EvaluationSample::new(
                evaluation.sample.id.clone(),
                evaluation.sample.ewc,
                evaluation.sample.cells.clone(),
            )?;
        }
        return Ok(history);
    }

    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(document.as_bytes());
    if !reader.headers()?.iter().eq(HISTORY_HEADER) {
        return Err(Error::Malformed(format!(
            "history header must be `{}`",
            HISTORY_HEADER.join(",")
        )));
    }

    struct Pending {
        ewc: u64,
        rating: Rating,
        cells: Vec<ErrorCountCell>,
    }
    let mut order: Vec<String> = Vec::new();
    let mut pending: HashMap<String, Pending> = HashMap::new();

    for (row, record) in reader.records().enumerate() {
        let record = record?;
        let line = row + 2;
        let id = record[0].to_string();
        let ewc: u64 = record[1].parse().map_err(|_| {
            Error::Malformed(format!(
                "line {line}: ewc `{}` is not a non-negative integer",
                &record[1]
            ))
        })?;
        let rating = parse_rating(&record[2], line)?;

        let entry = pending.entry(id.clone()).or_insert_with(|| {
            order.push(id.clone());
            Pending {
                ewc,
                rating,
                cells: Vec::new(),
            }
        });
        if entry.ewc != ewc || entry.rating != rating {
            return Err(Error::Malformed(format!(
                "line {line}: sample `{id}` repeats with a different ewc or holistic_rating"
            )));
        }
        if record[3].is_empty() && record[4].is_empty() && record[5].is_empty() {
            continue;
        }
        let count = record[5].parse().map_err(|_| {
            Error::Malformed(format!(
                "line {line}: count `{}` is not a non-negative integer",
                &record[5]
            ))
        })?;
        entry.cells.push(ErrorCountCell::new(&record[3], &record[4], count));
    }

    order
        .into_iter()
        .map(|id| {
            let p = pending.remove(&id).expect("every ordered id is pending");
            Ok(HistoricalEvaluation {
                sample: EvaluationSample::new(id, p.ewc, p.cells)?,
                holistic_rating: p.rating,
            })
        })
        .collect()
}

/// One CSV row per candidate.
pub fn replay_table(results: &[ReplayResult]) -> String {
    let mut out = String::from("candidate_id,agreement,pass_pass,pass_fail,fail_pass,fail_fail\n");
    for r in results {
        let c = &r.confusion;
        let _ = writeln!(
            out,
            "{},{:.6},{},{},{},{}",
            r.candidate_id, r.agreement, c.pass_pass, c.pass_fail, c.fail_pass, c.fail_fail
        );
    }
    out
}
