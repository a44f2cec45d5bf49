//! Append-only document store.
//!
//! Each kind of document lives in its own log file (`metric.jsonl`,
//! `sample.jsonl`, ...) under a data directory. Every `put` or `delete`
//! appends one line; nothing is rewritten. On open the logs are replayed into
//! an in-memory index of latest revisions.
//!
//! Writes to one kind are serialized behind a mutex and fsynced before they
//! are acknowledged. Readers never take that lock: they load the current
//! index snapshot, which is swapped atomically after each write.

use std::collections::BTreeMap;
use std::fmt;
use std::fs::{self, File, OpenOptions};
use std::io::{self, BufRead, BufReader, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::{Arc, Mutex};

use arc_swap::ArcSwap;
use chrono::{DateTime, Utc};
use mqm_core::{CalibrationSession, EvaluationSample, MetricSpec, ScoreReport, ToleranceCurve};
use serde::{Deserialize, Serialize};
use serde_json::value::RawValue;
use serde_json::Value;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Kind {
    Metric,
    Sample,
    Curve,
    Report,
    Session,
}

impl Kind {
    pub const ALL: [Kind; 5] = [Kind::Metric, Kind::Sample, Kind::Curve, Kind::Report, Kind::Session];

    fn file_name(self) -> &'static str {
        match self {
            Kind::Metric => "metric.jsonl",
            Kind::Sample => "sample.jsonl",
            Kind::Curve => "curve.jsonl",
            Kind::Report => "report.jsonl",
            Kind::Session => "session.jsonl",
        }
    }

    /// Parses `body` with the owning module's deserializer and returns the
    /// canonical (compact) serialization, plus the document's own id if it has one.
    fn canonicalize(self, body: &str) -> Result<(String, Option<String>), mqm_core::Error> {
        fn canon<T: Serialize + for<'de> Deserialize<'de>>(body: &str) -> Result<String, mqm_core::Error> {
            let value: T = serde_json::from_str(body)?;
            Ok(serde_json::to_string(&value).expect("documents serialize"))
        }
        Ok(match self {
            Kind::Metric => {
                let spec = MetricSpec::from_json(body)?;
                (serde_json::to_string(&spec).expect("metric serializes"), Some(spec.id))
            }
            Kind::Sample => {
                let sample = EvaluationSample::from_json(body)?;
                (
                    serde_json::to_string(&sample).expect("sample serializes"),
                    Some(sample.id),
                )
            }
            Kind::Curve => (canon::<ToleranceCurve>(body)?, None),
            Kind::Report => (canon::<ScoreReport>(body)?, None),
            Kind::Session => {
                let session: CalibrationSession = serde_json::from_str(body)?;
                (
                    serde_json::to_string(&session).expect("session serializes"),
                    Some(session.id),
                )
            }
        })
    }
}

impl fmt::Display for Kind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Kind::Metric => "METRIC",
            Kind::Sample => "SAMPLE",
            Kind::Curve => "CURVE",
            Kind::Report => "REPORT",
            Kind::Session => "SESSION",
        })
    }
}

impl FromStr for Kind {
    type Err = StoreError;

    fn from_str(s: &str) -> Result<Self> {
        Kind::ALL
            .into_iter()
            .find(|k| k.to_string().eq_ignore_ascii_case(s))
            .ok_or_else(|| StoreError::UnknownKind(s.to_string()))
    }
}

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error("{kind} `{id}` not found")]
    NotFound { kind: Kind, id: String },
    #[error("malformed {kind} body: {source}")]
    Malformed {
        kind: Kind,
        #[source]
        source: mqm_core::Error,
    },
    #[error("unknown kind `{0}`")]
    UnknownKind(String),
    #[error("id must be non-empty and contain no control characters")]
    BadId,
    #[error("{path}:{line}: corrupt record: {message}")]
    Corrupt {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error(transparent)]
    Io(#[from] io::Error),
}

pub type Result<T, E = StoreError> = std::result::Result<T, E>;

/// One revision of a stored document.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StoredEntity {
    pub kind: Kind,
    pub id: String,
    /// 1 for the first put of an id, then increasing.
    pub revision: u64,
    pub created_at: DateTime<Utc>,
    /// Canonical serialized document.
    pub body: String,
}

impl StoredEntity {
    /// The body parsed as a generic JSON value.
    pub fn json(&self) -> Value {
        serde_json::from_str(&self.body).expect("stored bodies are valid JSON")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
enum Op {
    Put,
    Delete,
}

#[derive(Serialize)]
struct RecordOut<'a> {
    op: Op,
    kind: Kind,
    id: &'a str,
    revision: u64,
    created_at: DateTime<Utc>,
    #[serde(skip_serializing_if = "Option::is_none")]
    body: Option<&'a RawValue>,
}

#[derive(Deserialize)]
struct RecordIn {
    op: Op,
    kind: Kind,
    id: String,
    revision: u64,
    created_at: DateTime<Utc>,
    #[serde(default)]
    body: Option<Box<RawValue>>,
}

#[derive(Debug, Clone, Default)]
struct Index {
    live: BTreeMap<String, Arc<StoredEntity>>,
    /// Last revision per id, including deleted ids, so revisions never repeat.
    revisions: BTreeMap<String, u64>,
}

struct Partition {
    kind: Kind,
    writer: Mutex<File>,
    index: ArcSwap<Index>,
}

/// Metadata predicate for [`Store::list`]: a document matches when its
/// top-level field `key`, or entry `key` of its `metadata` map, equals `value`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Filter {
    pub key: String,
    pub value: String,
}

impl Filter {
    pub fn new(key: impl Into<String>, value: impl Into<String>) -> Self {
        Self {
            key: key.into(),
            value: value.into(),
        }
    }

    fn matches(&self, body: &Value) -> bool {
        let equal = |v: &Value| match v {
            Value::String(s) => *s == self.value,
            // Numbers compare by value, so `10` matches a stored `10.0`.
            Value::Number(n) => match (n.as_f64(), self.value.parse::<f64>()) {
                (Some(x), Ok(y)) => x == y,
                _ => false,
            },
            Value::Bool(b) => b.to_string() == self.value,
            _ => false,
        };
        body.get(&self.key).is_some_and(equal) || body.get("metadata").and_then(|m| m.get(&self.key)).is_some_and(equal)
    }
}

impl FromStr for Filter {
    type Err = String;

    /// `key=value`.
    fn from_str(s: &str) -> Result<Self, String> {
        let (key, value) = s
            .split_once('=')
            .ok_or_else(|| format!("filter `{s}` is not key=value"))?;
        Ok(Filter::new(key.trim(), value.trim()))
    }
}

pub struct Store {
    root: PathBuf,
    partitions: BTreeMap<Kind, Partition>,
}

impl fmt::Debug for Store {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Store")
            .field("root", &self.root)
            .finish_non_exhaustive()
    }
}

impl Store {
    /// Opens (creating if needed) the store rooted at `dir` and rebuilds the index.
    pub fn open(dir: impl AsRef<Path>) -> Result<Self> {
        let root = dir.as_ref().to_path_buf();
        fs::create_dir_all(&root)?;
        let mut partitions = BTreeMap::new();
        for kind in Kind::ALL {
            let path = root.join(kind.file_name());
            let mut file = OpenOptions::new().create(true).read(true).append(true).open(&path)?;
            let index = load_log(kind, &path, &mut file)?;
            partitions.insert(
                kind,
                Partition {
                    kind,
                    writer: Mutex::new(file),
                    index: ArcSwap::from_pointee(index),
                },
            );
        }
        Ok(Self { root, partitions })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn partition(&self, kind: Kind) -> &Partition {
        &self.partitions[&kind]
    }

    /// Stores a new revision of a document.
    ///
    /// The id is `id` when given, else the document's own `id` field, else a
    /// fresh UUID. The body is validated and canonicalized first; the stored
    /// body is the canonical form.
    pub fn put(&self, kind: Kind, id: Option<&str>, body: &str) -> Result<StoredEntity> {
        let (canonical, own_id) = kind
            .canonicalize(body)
            .map_err(|source| StoreError::Malformed { kind, source })?;
        let id = match id.map(str::to_string).or(own_id) {
            Some(id) => id,
            None => uuid::Uuid::new_v4().to_string(),
        };
        if id.is_empty() || id.chars().any(char::is_control) {
            return Err(StoreError::BadId);
        }
        self.partition(kind).append(Op::Put, &id, Some(canonical))
    }

    /// Latest revision of `id`.
    pub fn get(&self, kind: Kind, id: &str) -> Result<StoredEntity> {
        self.partition(kind)
            .index
            .load()
            .live
            .get(id)
            .map(|e| StoredEntity::clone(e))
            .ok_or_else(|| StoreError::NotFound {
                kind,
                id: id.to_string(),
            })
    }

    /// Latest revisions of all live documents of a kind, ordered by id, that
    /// satisfy every filter.
    pub fn list(&self, kind: Kind, filters: &[Filter]) -> Vec<StoredEntity> {
        let index = self.partition(kind).index.load();
        index
            .live
            .values()
            .filter(|e| {
                filters.is_empty() || {
                    let body = e.json();
                    filters.iter().all(|f| f.matches(&body))
                }
            })
            .map(|e| StoredEntity::clone(e))
            .collect()
    }

    /// Records a deletion. Earlier revisions stay in the log.
    pub fn delete(&self, kind: Kind, id: &str) -> Result<()> {
        self.partition(kind).append(Op::Delete, id, None).map(|_| ())
    }
}

impl Partition {
    fn append(&self, op: Op, id: &str, body: Option<String>) -> Result<StoredEntity> {
        let mut file = self.writer.lock().unwrap_or_else(|poisoned| poisoned.into_inner());
        let current = self.index.load_full();
        if op == Op::Delete && !current.live.contains_key(id) {
            return Err(StoreError::NotFound {
                kind: self.kind,
                id: id.to_string(),
            });
        }

        let revision = current.revisions.get(id).copied().unwrap_or(0) + 1;
        let created_at = Utc::now();
        let raw = body
            .as_ref()
            .map(|b| RawValue::from_string(b.clone()).expect("canonical bodies are JSON"));
        let mut line = serde_json::to_string(&RecordOut {
            op,
            kind: self.kind,
            id,
            revision,
            created_at,
            body: raw.as_deref(),
        })
        .expect("records serialize");
        line.push('\n');
        file.write_all(line.as_bytes())?;
        file.sync_data()?;

        let entity = StoredEntity {
            kind: self.kind,
            id: id.to_string(),
            revision,
            created_at,
            body: body.unwrap_or_default(),
        };
        let mut next = Index::clone(&current);
        next.revisions.insert(id.to_string(), revision);
        match op {
            Op::Put => {
                next.live.insert(id.to_string(), Arc::new(entity.clone()));
            }
            Op::Delete => {
                next.live.remove(id);
            }
        }
        self.index.store(Arc::new(next));
        Ok(entity)
    }
}

/// Replays a log. A final line without its newline is a write cut short by a
/// crash; it is dropped and the file truncated back to the last full record.
fn load_log(kind: Kind, path: &Path, file: &mut File) -> Result<Index> {
    file.seek(SeekFrom::Start(0))?;
    let mut reader = BufReader::new(&*file);
    let mut index = Index::default();
    let mut line = String::new();
    let mut good_len = 0u64;
    let mut line_no = 0;
    loop {
        line.clear();
        let read = reader.read_line(&mut line)?;
        if read == 0 {
            break;
        }
        line_no += 1;
        if !line.ends_with('\n') {
            break;
        }
        good_len += read as u64;
        if line.trim().is_empty() {
            continue;
        }
        let corrupt = |message: String| StoreError::Corrupt {
            path: path.to_path_buf(),
            line: line_no,
            message,
        };
        let record: RecordIn = serde_json::from_str(&line).map_err(|e| corrupt(e.to_string()))?;
        if record.kind != kind {
            return Err(corrupt(format!("{} record in the {kind} log", record.kind)));
        }
        index.revisions.insert(record.id.clone(), record.revision);
        match (record.op, record.body) {
            (Op::Put, Some(body)) => {
                let entity = StoredEntity {
                    kind,
                    id: record.id.clone(),
                    revision: record.revision,
                    created_at: record.created_at,
                    body: body.get().to_string(),
                };
                index.live.insert(record.id, Arc::new(entity));
            }
            (Op::Put, None) => return Err(corrupt("put without a body".into())),
            (Op::Delete, _) => {
                index.live.remove(&record.id);
            }
        }
    }
    drop(reader);
    if file.metadata()?.len() != good_len {
        file.set_len(good_len)?;
        file.sync_data()?;
    }
    Ok(index)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kind_names() {
        assert_eq!(Kind::Metric.to_string(), "METRIC");
        assert_eq!("session".parse::<Kind>().unwrap(), Kind::Session);
        assert!("widget".parse::<Kind>().is_err());
        assert_eq!(serde_json::to_string(&Kind::Curve).unwrap(), "\"CURVE\"");
    }

    #[test]
    fn filters() {
        let body: Value = serde_json::json!({"id": "a", "ewc": 250, "metadata": {"lang": "de-DE"}});
        assert!(Filter::new("lang", "de-DE").matches(&body));
        assert!(Filter::new("ewc", "250").matches(&body));
        assert!(Filter::new("ewc", "250.0").matches(&body));
        assert!(!Filter::new("ewc", "many").matches(&body));
        assert!(!Filter::new("lang", "fr-FR").matches(&body));
        assert!(!Filter::new("missing", "x").matches(&body));
        assert_eq!("lang = de-DE".parse::<Filter>().unwrap(), Filter::new("lang", "de-DE"));
        assert!("nonsense".parse::<Filter>().is_err());
    }
}
