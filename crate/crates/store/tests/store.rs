use std::fs::OpenOptions;
use std::io::Write;
use std::sync::Arc;
use std::thread;

use mqm_core::{
    default_core_metric, fit_tolerance_curve, score_sample, ErrorCountCell, EvaluationSample, ScoreOptions,
    TolerancePoint,
};
use mqm_store::{Filter, Kind, Store, StoreError};

fn metric_body(pt: u32) -> String {
    let mut spec = default_core_metric().unwrap();
    spec.pt = pt.into();
    spec.to_json()
}

fn sample_body(id: &str, lang: &str) -> String {
    let mut s = EvaluationSample::new(id, 2500, vec![ErrorCountCell::new("accuracy", "Minor", 39)]).unwrap();
    s.metadata.insert("lang".into(), lang.into());
    s.to_json()
}

#[test]
fn put_then_get_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let store = Store::open(dir.path()).unwrap();
    let put = store.put(Kind::Metric, None, &metric_body(85)).unwrap();
    assert_eq!(put.id, "mqm-core-default");
    assert_eq!(put.revision, 1);
    let got = store.get(Kind::Metric, &put.id).unwrap();
    assert_eq!(got, put);

    // The canonical body is a fixed point: storing it again stores the same bytes.
    let again = store.put(Kind::Metric, None, &got.body).unwrap();
    assert_eq!(again.body, got.body);
    assert_eq!(again.revision, 2);
}

#[test]
fn every_kind_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let store = Store::open(dir.path()).unwrap();
    let spec = default_core_metric().unwrap();
    let sample = EvaluationSample::new("w", 2500, vec![ErrorCountCell::new("accuracy", "Minor", 39)]).unwrap();
    let report = score_sample(&sample, &spec, ScoreOptions::default()).unwrap();
    let curve = fit_tolerance_curve(&[TolerancePoint::new(250, 5.0), TolerancePoint::new(1750, 17.5)]).unwrap();
    let session = serde_json::json!({"id": "s1", "history": [], "candidates": [spec]}).to_string();

    for (kind, body) in [
        (Kind::Sample, sample.to_json()),
        (Kind::Report, report.to_json()),
        (Kind::Curve, serde_json::to_string(&curve).unwrap()),
        (Kind::Session, session),
    ] {
        let put = store.put(kind, None, &body).unwrap();
        let got = store.get(kind, &put.id).unwrap();
        assert_eq!(got.body, put.body, "{kind}");
        assert_eq!(
            store.put(kind, Some(&put.id), &got.body).unwrap().body,
            got.body,
            "{kind} canonical form"
        );
    }
    let report_back = mqm_core::ScoreReport::from_json(&store.list(Kind::Report, &[])[0].body).unwrap();
    assert_eq!(report_back.calibrated_score, report.calibrated_score);
}

#[test]
fn unknown_id_is_not_found() {
    let dir = tempfile::tempdir().unwrap();
    let store = Store::open(dir.path()).unwrap();
    assert!(matches!(
        store.get(Kind::Metric, "nope"),
        Err(StoreError::NotFound { .. })
    ));
    assert!(matches!(
        store.delete(Kind::Metric, "nope"),
        Err(StoreError::NotFound { .. })
    ));
}

#[test]
fn latest_revision_wins() {
    let dir = tempfile::tempdir().unwrap();
    let store = Store::open(dir.path()).unwrap();
    store.put(Kind::Metric, Some("m"), &metric_body(80)).unwrap();
    let second = store.put(Kind::Metric, Some("m"), &metric_body(90)).unwrap();
    let listed = store.list(Kind::Metric, &[]);
    assert_eq!(listed.len(), 1);
    assert_eq!(listed[0].body, second.body);
    assert_eq!(store.get(Kind::Metric, "m").unwrap().revision, 2);
}

#[test]
fn malformed_bodies_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let store = Store::open(dir.path()).unwrap();
    assert!(matches!(
        store.put(Kind::Metric, None, "{not json"),
        Err(StoreError::Malformed { .. })
    ));
    assert!(matches!(
        store.put(Kind::Sample, None, r#"{"id":"x","ewc":0,"cells":[]}"#),
        Err(StoreError::Malformed { .. })
    ));
    assert!(matches!(
        store.put(Kind::Metric, Some(""), &metric_body(85)),
        Err(StoreError::BadId)
    ));
    assert!(store.list(Kind::Metric, &[]).is_empty());
}

#[test]
fn filters_and_delete() {
    let dir = tempfile::tempdir().unwrap();
    let store = Store::open(dir.path()).unwrap();
    store.put(Kind::Sample, None, &sample_body("a", "de-DE")).unwrap();
    store.put(Kind::Sample, None, &sample_body("b", "fr-FR")).unwrap();
    store.put(Kind::Sample, None, &sample_body("c", "de-DE")).unwrap();

    let german: Vec<_> = store
        .list(Kind::Sample, &[Filter::new("lang", "de-DE")])
        .into_iter()
        .map(|e| e.id)
        .collect();
    assert_eq!(german, ["a", "c"]);
    assert_eq!(store.list(Kind::Sample, &[Filter::new("ewc", "2500")]).len(), 3);

    store.delete(Kind::Sample, "a").unwrap();
    assert!(store.get(Kind::Sample, "a").is_err());
    assert_eq!(store.list(Kind::Sample, &[]).len(), 2);
    // The tombstone is revision 2; a later put of the id continues from there.
    assert_eq!(
        store
            .put(Kind::Sample, None, &sample_body("a", "it-IT"))
            .unwrap()
            .revision,
        3
    );
}

#[test]
fn survives_reopen() {
    let dir = tempfile::tempdir().unwrap();
    let body = {
        let store = Store::open(dir.path()).unwrap();
        store.put(Kind::Sample, None, &sample_body("gone", "de-DE")).unwrap();
        store.delete(Kind::Sample, "gone").unwrap();
        store.put(Kind::Metric, Some("m"), &metric_body(80)).unwrap();
        store.put(Kind::Metric, Some("m"), &metric_body(90)).unwrap().body
    };
    let store = Store::open(dir.path()).unwrap();
    let got = store.get(Kind::Metric, "m").unwrap();
    assert_eq!(got.body, body);
    assert_eq!(got.revision, 2);
    assert!(store.get(Kind::Sample, "gone").is_err());
}

#[test]
fn torn_final_record_is_dropped() {
    let dir = tempfile::tempdir().unwrap();
    {
        let store = Store::open(dir.path()).unwrap();
        store.put(Kind::Metric, Some("m"), &metric_body(80)).unwrap();
    }
    let log = dir.path().join("metric.jsonl");
    let intact = std::fs::metadata(&log).unwrap().len();
    OpenOptions::new()
        .append(true)
        .open(&log)
        .unwrap()
        .write_all(br#"{"op":"put","kind":"METRIC","id":"m","rev"#)
        .unwrap();

    let store = Store::open(dir.path()).unwrap();
    assert_eq!(store.get(Kind::Metric, "m").unwrap().revision, 1);
    assert_eq!(std::fs::metadata(&log).unwrap().len(), intact);
    assert_eq!(
        store.put(Kind::Metric, Some("m"), &metric_body(90)).unwrap().revision,
        2
    );
    drop(store);
    assert_eq!(
        Store::open(dir.path())
            .unwrap()
            .get(Kind::Metric, "m")
            .unwrap()
            .revision,
        2
    );
}

#[test]
fn corrupt_interior_record_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("curve.jsonl"), "garbage\n").unwrap();
    assert!(matches!(
        Store::open(dir.path()),
        Err(StoreError::Corrupt { line: 1, .. })
    ));
}

#[test]
fn readers_never_see_torn_bodies() {
    let dir = tempfile::tempdir().unwrap();
    let store = Arc::new(Store::open(dir.path()).unwrap());
    let bodies: Vec<String> = (70..90)
        .map(|pt| store.put(Kind::Metric, Some("m"), &metric_body(pt)).unwrap().body)
        .collect();
    let bodies = Arc::new(bodies);

    let writers: Vec<_> = (0..4)
        .map(|w| {
            let store = Arc::clone(&store);
            thread::spawn(move || {
                for i in 0..25 {
                    store
                        .put(Kind::Metric, Some("m"), &metric_body(70 + (w * 5 + i) % 20))
                        .unwrap();
                }
            })
        })
        .collect();
    let readers: Vec<_> = (0..4)
        .map(|_| {
            let store = Arc::clone(&store);
            let bodies = Arc::clone(&bodies);
            thread::spawn(move || {
                let mut last = 0;
                for _ in 0..500 {
                    let got = store.get(Kind::Metric, "m").unwrap();
                    assert!(bodies.contains(&got.body));
                    assert!(got.revision >= last, "revisions went backwards");
                    last = got.revision;
                }
            })
        })
        .collect();
    for handle in writers.into_iter().chain(readers) {
        handle.join().unwrap();
    }

    let final_revision = store.get(Kind::Metric, "m").unwrap().revision;
    assert_eq!(final_revision, 20 + 100);
    drop(store);
    assert_eq!(
        Store::open(dir.path())
            .unwrap()
            .get(Kind::Metric, "m")
            .unwrap()
            .revision,
        final_revision
    );
}
