use std::str::FromStr;

use proptest::prelude::*;

use mqm_core::linear::{calibrated_score, penalty_breakdown, raw_score};
use mqm_core::nonlinear::sum_squared_residuals;
use mqm_core::{
    acceptance_probability, default_core_metric, find_plan, fit_tolerance_curve, merge_samples, replay, Decimal,
    ErrorCountCell, EvaluationSample, HistoricalEvaluation, InspectionUnit, MetricSpec, Rating, TolerancePoint,
};

const TYPES: [&str; 3] = ["accuracy", "style", "terminology"];
const LEVELS: [&str; 4] = ["Neutral", "Minor", "Major", "Critical"];

fn spec() -> MetricSpec {
    default_core_metric().unwrap()
}

fn cells_strategy() -> impl Strategy<Value = Vec<ErrorCountCell>> {
    proptest::collection::vec(0u64..40, TYPES.len() * LEVELS.len()).prop_map(|counts| {
        counts
            .into_iter()
            .enumerate()
            .filter(|&(_, n)| n > 0)
            .map(|(i, n)| ErrorCountCell::new(TYPES[i / LEVELS.len()], LEVELS[i % LEVELS.len()], n))
            .collect()
    })
}

fn sample_strategy() -> impl Strategy<Value = EvaluationSample> {
    (1u64..20_000, cells_strategy(), "[a-z]{1,8}")
        .prop_map(|(ewc, cells, id)| EvaluationSample::new(id, ewc, cells).unwrap())
}

fn calibrated(sample: &EvaluationSample, spec: &MetricSpec) -> Decimal {
    calibrated_score(&penalty_breakdown(sample, spec).unwrap(), spec).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn more_errors_never_score_higher(s in sample_strategy(), t in 0..TYPES.len(), l in 1..LEVELS.len(), extra in 1u64..20) {
        let spec = spec();
        let mut cells = s.cells.clone();
        match cells.iter_mut().find(|c| c.error_type_id == TYPES[t] && c.severity_name == LEVELS[l]) {
            Some(cell) => cell.count += extra,
            None => cells.push(ErrorCountCell::new(TYPES[t], LEVELS[l], extra)),
        }
        let worse = EvaluationSample::new("w", s.ewc, cells).unwrap();
        let (before, after) = (penalty_breakdown(&s, &spec).unwrap(), penalty_breakdown(&worse, &spec).unwrap());
        prop_assert!(raw_score(&after, &spec) < raw_score(&before, &spec));
        prop_assert!(calibrated_score(&after, &spec).unwrap() < calibrated_score(&before, &spec).unwrap());
    }

    #[test]
    fn scaling_all_weights_scales_apt(s in sample_strategy(), k in 1i64..1000) {
        let spec = spec();
        let mut scaled = spec.clone();
        let factor = Decimal::new(k, 2);
        for node in &mut scaled.typology {
            node.weight *= factor;
        }
        let base = penalty_breakdown(&s, &spec).unwrap();
        let after = penalty_breakdown(&s, &scaled).unwrap();
        prop_assert_eq!(after.apt, base.apt * factor);
        for (id, etpt) in &base.etpt_by_type {
            prop_assert_eq!(after.etpt_by_type[id], *etpt * factor);
        }
    }

    #[test]
    fn merged_apt_is_additive(a in sample_strategy(), b in sample_strategy()) {
        let spec = spec();
        let merged = merge_samples(&[a.clone(), b.clone()]).unwrap();
        prop_assert_eq!(merged.ewc, a.ewc + b.ewc);
        let (pa, pb, pm) = (
            penalty_breakdown(&a, &spec).unwrap(),
            penalty_breakdown(&b, &spec).unwrap(),
            penalty_breakdown(&merged, &spec).unwrap(),
        );
        prop_assert_eq!(pm.apt, pa.apt + pb.apt);
        // The merged density is a word-weighted mean of the two densities.
        let (ra, rb, rm) = (raw_score(&pa, &spec), raw_score(&pb, &spec), raw_score(&pm, &spec));
        let slack = Decimal::new(1, 20);
        prop_assert!(rm >= ra.min(rb) - slack && rm <= ra.max(rb) + slack, "{} not between {} and {}", rm, ra, rb);
    }

    #[test]
    fn merge_is_commutative_and_associative(a in sample_strategy(), b in sample_strategy(), c in sample_strategy()) {
        let spec = spec();
        let apt = |s: &EvaluationSample| penalty_breakdown(s, &spec).unwrap().apt;
        let ab = merge_samples(&[a.clone(), b.clone()]).unwrap();
        let ba = merge_samples(&[b.clone(), a.clone()]).unwrap();
        prop_assert_eq!(ab.ewc, ba.ewc);
        prop_assert_eq!(apt(&ab), apt(&ba));
        let left = merge_samples(&[ab, c.clone()]).unwrap();
        let right = merge_samples(&[a.clone(), merge_samples(&[b.clone(), c.clone()]).unwrap()]).unwrap();
        prop_assert_eq!(left.ewc, right.ewc);
        prop_assert_eq!(apt(&left), apt(&right));
        prop_assert_eq!(&left.provenance, &right.provenance);
        for t in TYPES {
            for l in LEVELS {
                prop_assert_eq!(left.count_for(t, l), right.count_for(t, l));
            }
        }
    }

    #[test]
    fn calibrated_score_is_affine_in_npt(minors in 0u64..200) {
        // Calibrated score moves by exactly one scaling factor per normed point.
        let spec = spec();
        let at = |n: u64| calibrated(&EvaluationSample::new("x", 1000, vec![ErrorCountCell::new("style", "Minor", n)]).unwrap(), &spec);
        prop_assert_eq!(at(minors) - at(minors + 1), Decimal::from_str("0.75").unwrap());
    }

    #[test]
    fn raising_pt_never_adds_passes(s in sample_strategy(), low in 0i64..9000, bump in 1i64..1000) {
        let mut lower = spec();
        lower.pt = Decimal::new(low, 2);
        let mut higher = lower.clone();
        higher.pt = Decimal::new(low + bump, 2);
        let pass = |spec: &MetricSpec| calibrated(&s, spec) >= spec.pt;
        prop_assert!(!pass(&higher) || pass(&lower));
    }

    #[test]
    fn sample_round_trips(s in sample_strategy()) {
        prop_assert_eq!(EvaluationSample::from_json(&s.to_json()).unwrap(), s.clone());
        prop_assert_eq!(EvaluationSample::from_tabular(&s.to_tabular()).unwrap(), s);
    }

    #[test]
    fn least_squares_is_optimal(
        raw in proptest::collection::vec((10u64..100_000, 0.5f64..100.0), 3..10),
        da in -0.1f64..0.1,
        db in -0.1f64..0.1,
    ) {
        let points: Vec<_> = raw.iter().map(|&(n, y)| TolerancePoint::new(n, y)).collect();
        prop_assume!(points.iter().any(|p| p.sample_words != points[0].sample_words));
        // A fit may be rejected (e.g. decreasing data); optimality only concerns accepted ones.
        if let Ok(curve) = fit_tolerance_curve(&points) {
            let best = sum_squared_residuals(&points, curve.a, curve.b);
            prop_assert!((best - curve.fit_residual).abs() <= 1e-9 * (1.0 + best));
            let perturbed = sum_squared_residuals(&points, curve.a + da, curve.b + db);
            prop_assert!(perturbed >= best - 1e-9 * (1.0 + best));
        }
    }

    #[test]
    fn pa_is_monotone(n in 1u64..200, c_frac in 0.0f64..1.0, p in 0.0f64..0.99, dp in 0.001f64..0.01) {
        let c = ((n as f64) * c_frac) as u64;
        let pa = acceptance_probability(n, c, p).unwrap();
        prop_assert!(acceptance_probability(n, c, p + dp).unwrap() <= pa + 1e-12);
        if c < n {
            prop_assert!(acceptance_probability(n, c + 1, p).unwrap() >= pa - 1e-12);
        }
        prop_assert!((0.0..=1.0).contains(&pa));
    }

    #[test]
    fn found_plan_is_minimal(aql in 0.005f64..0.05, gap in 0.05f64..0.4, alpha in 0.01f64..0.2, beta in 0.01f64..0.2) {
        let rql = aql + gap;
        let plan = find_plan(aql, rql, alpha, beta, 500, InspectionUnit::Sentence).unwrap();
        prop_assert!(plan.producer_risk <= alpha && plan.consumer_risk <= beta);
        for n in 1..=plan.n {
            let c_limit = if n == plan.n { plan.c } else { n + 1 };
            for c in 0..c_limit.min(n + 1) {
                let ok = 1.0 - acceptance_probability(n, c, aql).unwrap() <= alpha
                    && acceptance_probability(n, c, rql).unwrap() <= beta;
                prop_assert!(!ok, "({}, {}) also satisfies the risks", n, c);
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn replay_ignores_history_order(
        minors in proptest::collection::vec((300u64..4000, 0u64..60, any::<bool>()), 1..12),
        rotate in 0usize..12,
    ) {
        let mut history: Vec<_> = minors
            .iter()
            .enumerate()
            .map(|(i, &(ewc, n, pass))| HistoricalEvaluation {
                sample: EvaluationSample::new(format!("h{i}"), ewc, vec![ErrorCountCell::new("accuracy", "Minor", n)]).unwrap(),
                holistic_rating: if pass { Rating::Pass } else { Rating::Fail },
            })
            .collect();
        let mut strict = spec();
        strict.id = "strict".into();
        strict.app = Decimal::from(5);
        let candidates = [spec(), strict];
        let before = replay(&history, &candidates).unwrap();
        let k = rotate % history.len();
        history.rotate_left(k);
        let after = replay(&history, &candidates).unwrap();
        for (x, y) in before.iter().zip(&after) {
            prop_assert_eq!(x.confusion, y.confusion);
            prop_assert_eq!(x.agreement, y.agreement);
        }
    }
}
