//! Evaluation samples (scorecards): the evaluated word count and error counts
//! per error type and severity level.
//!
//! Two on-disk shapes are accepted by [`load_sample`]:
//!
//! * the canonical JSON document (field names as on [`EvaluationSample`]);
//! * a tabular CSV form: `key,value` preamble rows (`ewc` is required, `id`
//!   optional, anything else becomes metadata), then the header row
//!   `error_type_id,severity,count` followed by one row per cell.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const TABULAR_HEADER: [&str; 3] = ["error_type_id", "severity", "count"];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ErrorCountCell {
    pub error_type_id: String,
    pub severity_name: String,
    pub count: u64,
}

impl ErrorCountCell {
    pub fn new(error_type_id: impl Into<String>, severity_name: impl Into<String>, count: u64) -> Self {
        Self {
            error_type_id: error_type_id.into(),
            severity_name: severity_name.into(),
            count,
        }
    }

    fn key(&self) -> (&str, &str) {
        (&self.error_type_id, &self.severity_name)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvaluationSample {
    pub id: String,
    /// Evaluation word count (source words).
    pub ewc: u64,
    #[serde(default)]
    pub cells: Vec<ErrorCountCell>,
    #[serde(default)]
    pub metadata: BTreeMap<String, String>,
    /// Ids of the samples this one was merged from.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub provenance: Vec<String>,
}

impl EvaluationSample {
    pub fn new(id: impl Into<String>, ewc: u64, cells: Vec<ErrorCountCell>) -> Result<Self> {
        let sample = Self {
            id: id.into(),
            ewc,
            cells,
            metadata: BTreeMap::new(),
            provenance: Vec::new(),
        };
        sample.validate()?;
        Ok(sample)
    }

    /// Checks `ewc >= 1` and that no (type, severity) cell appears twice.
    pub fn validate(&self) -> Result<()> {
        if self.ewc < 1 {
            return Err(Error::invalid("sample", "ewc must be ≥ 1"));
        }
        let mut seen = HashMap::new();
        for cell in &self.cells {
            if seen.insert(cell.key(), ()).is_some() {
                return Err(Error::invalid(
                    "sample",
                    format!("duplicate cell ({}, {})", cell.error_type_id, cell.severity_name),
                ));
            }
        }
        Ok(())
    }

    pub fn total_count(&self) -> u64 {
        self.cells.iter().map(|c| c.count).sum()
    }

    pub fn count_for(&self, error_type_id: &str, severity_name: &str) -> u64 {
        self.cells
            .iter()
            .find(|c| c.key() == (error_type_id, severity_name))
            .map_or(0, |c| c.count)
    }

    pub fn from_json(document: &str) -> Result<Self> {
        let sample: Self = serde_json::from_str(document)?;
        sample.validate()?;
        Ok(sample)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("sample serializes")
    }

    pub fn from_tabular(document: &str) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(false)
            .flexible(true)
            .trim(csv::Trim::All)
            .from_reader(document.as_bytes());

        let mut id = None;
        let mut ewc = None;
        let mut metadata = BTreeMap::new();
        let mut cells = Vec::new();
        let mut in_body = false;

        for (line, record) in reader.records().enumerate() {
            let record = record?;
            let line = line + 1;
            if record.iter().all(str::is_empty) {
                continue;
            }
            if !in_body {
                if record.iter().eq(TABULAR_HEADER) {
                    in_body = true;
                    continue;
                }
                if record.len() != 2 {
                    return Err(Error::Malformed(format!(
                        "line {line}: expected a `key,value` preamble row or the `{}` header",
                        TABULAR_HEADER.join(",")
                    )));
                }
                let (key, value) = (&record[0], &record[1]);
                match key {
                    "ewc" => ewc = Some(parse_ewc(value)?),
                    "id" => id = Some(value.to_string()),
                    _ => {
                        metadata.insert(key.to_string(), value.to_string());
                    }
                }
                continue;
            }
            if record.len() != 3 {
                return Err(Error::Malformed(format!(
                    "line {line}: expected 3 fields, found {}",
                    record.len()
                )));
            }
            let count = record[2].parse::<u64>().map_err(|_| {
                Error::Malformed(format!(
                    "line {line}: count `{}` is not a non-negative integer",
                    &record[2]
                ))
            })?;
            cells.push(ErrorCountCell::new(&record[0], &record[1], count));
        }

        if !in_body {
            return Err(Error::Malformed(format!(
                "missing `{}` header row",
                TABULAR_HEADER.join(",")
            )));
        }
        let ewc = ewc.ok_or_else(|| Error::Malformed("missing `ewc,<n>` preamble row".into()))?;
        let sample = Self {
            id: id.unwrap_or_else(|| "sample".to_string()),
            ewc,
            cells,
            metadata,
            provenance: Vec::new(),
        };
        sample.validate()?;
        Ok(sample)
    }

    /// Tabular rendering; `from_tabular` reads it back (provenance is not kept).
    pub fn to_tabular(&self) -> String {
        let mut writer = csv::WriterBuilder::new()
            .flexible(true)
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(Vec::new());
        let rows = [["id", self.id.as_str()], ["ewc", &self.ewc.to_string()]];
        for row in rows {
            writer.write_record(row).expect("in-memory csv write");
        }
        for (key, value) in &self.metadata {
            writer.write_record([key, value]).expect("in-memory csv write");
        }
        writer.write_record(TABULAR_HEADER).expect("in-memory csv write");
        for cell in &self.cells {
            writer
                .write_record([&cell.error_type_id, &cell.severity_name, &cell.count.to_string()])
                .expect("in-memory csv write");
        }
        String::from_utf8(writer.into_inner().expect("in-memory csv flush")).expect("utf-8 csv")
    }
}

fn parse_ewc(value: &str) -> Result<u64> {
    let parsed: i64 = value
        .parse()
        .map_err(|_| Error::Malformed(format!("ewc `{value}` is not an integer")))?;
    if parsed < 1 {
        return Err(Error::invalid("sample", "ewc must be ≥ 1"));
    }
    Ok(parsed as u64)
}

/// Loads a sample from either the canonical JSON document or the tabular form.
pub fn load_sample(document: &str) -> Result<EvaluationSample> {
    if document.trim_start().starts_with('{') {
        EvaluationSample::from_json(document)
    } else {
        EvaluationSample::from_tabular(document)
    }
}

/// Pools several samples into one: word counts and per-cell counts are summed,
/// metadata comes from the first sample, and provenance lists every merged id.
pub fn merge_samples(samples: &[EvaluationSample]) -> Result<EvaluationSample> {
    let first = samples
        .first()
        .ok_or_else(|| Error::Precondition("cannot merge an empty list of samples".into()))?;

    let mut ewc: u64 = 0;
    let mut cells: Vec<ErrorCountCell> = Vec::new();
    let mut index: HashMap<(String, String), usize> = HashMap::new();
    let mut provenance = Vec::new();

    for sample in samples {
        ewc = ewc
            .checked_add(sample.ewc)
            .ok_or_else(|| Error::invalid("sample", "merged ewc overflows"))?;
        for cell in &sample.cells {
            let key = (cell.error_type_id.clone(), cell.severity_name.clone());
            match index.get(&key) {
                Some(&i) => {
                    cells[i].count = cells[i]
                        .count
                        .checked_add(cell.count)
                        .ok_or_else(|| Error::invalid("sample", "merged count overflows"))?;
                }
                None => {
                    index.insert(key, cells.len());
                    cells.push(cell.clone());
                }
            }
        }
        if sample.provenance.is_empty() {
            provenance.push(sample.id.clone());
        } else {
            provenance.extend(sample.provenance.iter().cloned());
        }
    }

    Ok(EvaluationSample {
        id: provenance.join("+"),
        ewc,
        cells,
        metadata: first.metadata.clone(),
        provenance,
    })
}
