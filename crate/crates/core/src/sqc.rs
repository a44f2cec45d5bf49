//! Single-sampling acceptance plans under a binomial model.
//!
//! Used for samples too small for analytic scoring: inspect `n` units, accept
//! the lot when at most `c` are defective. A defect is any error at Major
//! severity or above (see [`SeveritySystem::defect_start`]).
//!
//! [`SeveritySystem::defect_start`]: crate::metric::SeveritySystem::defect_start

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::annotation::EvaluationSample;
use crate::error::{Error, Result};
use crate::metric::MetricSpec;

/// Default sentence length used to convert word counts into sentence units.
pub const WORDS_PER_SENTENCE: u64 = 15;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum InspectionUnit {
    Word,
    #[default]
    Sentence,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplingPlan {
    pub n: u64,
    pub c: u64,
    #[serde(default)]
    pub unit: InspectionUnit,
    pub aql: f64,
    pub rql: f64,
    /// Probability of rejecting a lot at the AQL, `1 - Pa(aql)`.
    pub producer_risk: f64,
    /// Probability of accepting a lot at the RQL, `Pa(rql)`.
    pub consumer_risk: f64,
}

impl SamplingPlan {
    /// Builds a plan for given `(n, c)` and derives both risks.
    pub fn new(n: u64, c: u64, unit: InspectionUnit, aql: f64, rql: f64) -> Result<Self> {
        check_probability("aql", aql)?;
        check_probability("rql", rql)?;
        if !(0.0 < aql && aql < rql && rql < 1.0) {
            return Err(Error::Precondition(format!(
                "need 0 < aql < rql < 1 (aql {aql}, rql {rql})"
            )));
        }
        Ok(Self {
            n,
            c,
            unit,
            aql,
            rql,
            producer_risk: 1.0 - acceptance_probability(n, c, aql)?,
            consumer_risk: acceptance_probability(n, c, rql)?,
        })
    }

    pub fn accepts(&self, defects: u64) -> bool {
        defects <= self.c
    }

    pub fn oc_curve(&self, p_grid: &[f64]) -> Result<Vec<(f64, f64)>> {
        oc_curve(self.n, self.c, p_grid)
    }
}

fn check_probability(name: &str, p: f64) -> Result<()> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(Error::Precondition(format!(
            "{name} must be a probability in [0, 1] (got {p})"
        )))
    }
}

/// Probability of accepting a lot with defect rate `p` under plan `(n, c)`:
/// `sum_{k=0..c} C(n,k) p^k (1-p)^(n-k)`.
///
/// Terms are built in log space and summed relative to the largest term, so
/// large `n` neither underflows nor loses the small terms.
pub fn acceptance_probability(n: u64, c: u64, p: f64) -> Result<f64> {
    if c > n {
        return Err(Error::Precondition(format!(
            "acceptance number c ({c}) exceeds n ({n})"
        )));
    }
    check_probability("p", p)?;
    if c == n || p == 0.0 {
        return Ok(1.0);
    }
    if p == 1.0 {
        return Ok(0.0);
    }

    let (ln_p, ln_q) = (p.ln(), (-p).ln_1p());
    let nf = n as f64;
    let mut log_terms = Vec::with_capacity(c as usize + 1);
    let mut ln_choose = 0.0;
    for k in 0..=c {
        if k > 0 {
            ln_choose += ((nf - (k - 1) as f64) / k as f64).ln();
        }
        log_terms.push(ln_choose + k as f64 * ln_p + (nf - k as f64) * ln_q);
    }
    let max = log_terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let scaled: f64 = log_terms.iter().map(|t| (t - max).exp()).sum();
    Ok((max + scaled.ln()).exp().min(1.0))
}

/// The plan with the smallest `n` (then smallest `c`) whose producer risk is
/// at most `alpha_max` and consumer risk at most `beta_max`, by exhaustive
/// search over `n <= n_max`.
pub fn find_plan(
    aql: f64,
    rql: f64,
    alpha_max: f64,
    beta_max: f64,
    n_max: u64,
    unit: InspectionUnit,
) -> Result<SamplingPlan> {
    for (name, value) in [("aql", aql), ("rql", rql), ("alpha", alpha_max), ("beta", beta_max)] {
        if !(value > 0.0 && value <= 1.0) {
            return Err(Error::Precondition(format!("{name} must lie in (0, 1] (got {value})")));
        }
    }
    if rql <= aql {
        return Err(Error::Precondition(format!("rql ({rql}) must exceed aql ({aql})")));
    }
    if n_max == 0 {
        return Err(Error::Precondition("n_max must be positive".into()));
    }

    for n in 1..=n_max {
        for c in 0..=n {
            let producer_risk = 1.0 - acceptance_probability(n, c, aql)?;
            let consumer_risk = acceptance_probability(n, c, rql)?;
            if producer_risk <= alpha_max && consumer_risk <= beta_max {
                return Ok(SamplingPlan {
                    n,
                    c,
                    unit,
                    aql,
                    rql,
                    producer_risk,
                    consumer_risk,
                });
            }
            // Producer risk only falls as c grows while consumer risk only
            // rises, so once the consumer bound is broken no larger c helps.
            if consumer_risk > beta_max {
                break;
            }
        }
    }
    Err(Error::NoPlan(n_max))
}

/// Acceptance probability at each grid point, in input order.
pub fn oc_curve(n: u64, c: u64, p_grid: &[f64]) -> Result<Vec<(f64, f64)>> {
    p_grid
        .iter()
        .map(|&p| acceptance_probability(n, c, p).map(|pa| (p, pa)))
        .collect()
}

/// `p,pa` rows for plotting.
pub fn oc_curve_table(points: &[(f64, f64)]) -> String {
    let mut out = String::from("p,pa\n");
    for (p, pa) in points {
        let _ = writeln!(out, "{p},{pa:.12}");
    }
    out
}

/// An evenly spaced grid `0, 1/steps, ..., 1`.
pub fn uniform_grid(steps: usize) -> Vec<f64> {
    let steps = steps.max(1);
    (0..=steps).map(|i| i as f64 / steps as f64).collect()
}

/// Number of inspection units a sample of `ewc` words represents.
pub fn inspection_units(ewc: u64, unit: InspectionUnit, words_per_sentence: u64) -> u64 {
    match unit {
        InspectionUnit::Word => ewc,
        InspectionUnit::Sentence => ewc.div_ceil(words_per_sentence.max(1)),
    }
}

/// Errors at Major severity or above.
pub fn defect_count(sample: &EvaluationSample, spec: &MetricSpec) -> u64 {
    sample
        .cells
        .iter()
        .filter(|c| spec.severity.is_defect(&c.severity_name))
        .map(|c| c.count)
        .sum()
}
