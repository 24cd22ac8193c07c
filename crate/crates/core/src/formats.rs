//! File formats.
//!
//! Dataset JSON:
//!
//! ```json
//! {"assignment": [[[1,0,0],[0,1,0]], ...],
//!  "shots_per_setting": 1000,
//!  "tuples": [{"settings": [0,0,0], "counts": {"+++": 250, "++-": 0, ...}}]}
//! ```
//!
//! `shots_per_setting` is optional on input; without it every tuple must
//! carry the same total. Missing outcome labels count as zero.
//!
//! Correlation CSV: header `i,j,k,E,stderr`, one row per joint setting.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::bell::{tuple_count, tuple_index, SettingTuple, SettingsAssignment};
use crate::error::{Error, Result};
use crate::experiment::{CorrelationEstimate, Dataset, EstimateTable, TupleCounts};
use crate::quantum::OUTCOME_LABELS;

/// Significant digits kept for floats in JSON reports.
pub const JSON_SIGNIFICANT_DIGITS: usize = 12;

/// Rounds to `digits` significant digits (decimal), so that the JSON
/// rendering of e.g. `0.71 * 4.0` is `2.84`.
pub fn round_sig(x: f64, digits: usize) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return if x == 0.0 { 0.0 } else { x };
    }
    format!("{:.*e}", digits.saturating_sub(1), x)
        .parse()
        .unwrap_or(x)
}

/// [`round_sig`] at [`JSON_SIGNIFICANT_DIGITS`].
pub fn json_float(x: f64) -> f64 {
    round_sig(x, JSON_SIGNIFICANT_DIGITS)
}

fn schema(path: impl Into<String>, message: impl Into<String>) -> Error {
    Error::Schema {
        path: path.into(),
        message: message.into(),
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DatasetFile {
    assignment: SettingsAssignment,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    shots_per_setting: Option<u64>,
    tuples: Vec<TupleFile>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TupleFile {
    settings: SettingTuple,
    counts: BTreeMap<String, u64>,
}

pub fn read_dataset<R: Read>(reader: R) -> Result<Dataset> {
    let mut de = serde_json::Deserializer::from_reader(reader);
    let file: DatasetFile = serde_path_to_error::deserialize(&mut de).map_err(|e| {
        let path = e.path().to_string();
        schema(
            if path.is_empty() { ".".into() } else { path },
            e.into_inner().to_string(),
        )
    })?;
    dataset_from_file(file)
}

pub fn dataset_from_str(s: &str) -> Result<Dataset> {
    read_dataset(s.as_bytes())
}

fn dataset_from_file(file: DatasetFile) -> Result<Dataset> {
    let shape = file.assignment.shape();
    let mut tuples = Vec::with_capacity(file.tuples.len());
    let mut seen = vec![false; tuple_count(shape)];
    for (n, t) in file.tuples.iter().enumerate() {
        if t.settings.iter().zip(shape.iter()).any(|(a, k)| a >= k) {
            return Err(schema(
                format!("tuples[{n}].settings"),
                format!("{:?} outside shape {shape:?}", t.settings),
            ));
        }
        let idx = tuple_index(shape, t.settings);
        if std::mem::replace(&mut seen[idx], true) {
            return Err(schema(
                format!("tuples[{n}].settings"),
                format!("{:?} listed twice", t.settings),
            ));
        }
        let mut counts = [0u64; 8];
        for (label, &c) in &t.counts {
            let o = OUTCOME_LABELS
                .iter()
                .position(|l| l == label)
                .ok_or_else(|| {
                    schema(
                        format!("tuples[{n}].counts.{label}"),
                        "unknown outcome label",
                    )
                })?;
            counts[o] = c;
        }
        tuples.push(TupleCounts {
            settings: t.settings,
            counts,
        });
    }
    if let Some(missing) = seen.iter().position(|s| !s) {
        let t = crate::bell::tuple_at(shape, missing);
        return Err(schema(
            "tuples",
            format!("no entry for setting tuple {t:?}"),
        ));
    }
    let shots = match file.shots_per_setting {
        Some(s) => s,
        None => tuples[0].total(),
    };
    if shots == 0 {
        return Err(schema("shots_per_setting", "must be at least 1"));
    }
    for (n, t) in tuples.iter().enumerate() {
        if t.total() != shots {
            return Err(schema(
                format!("tuples[{n}].counts"),
                format!("counts sum to {}, expected {shots}", t.total()),
            ));
        }
    }
    Dataset::new(file.assignment, shots, tuples)
}

fn dataset_to_file(data: &Dataset) -> DatasetFile {
    DatasetFile {
        assignment: data.assignment().clone(),
        shots_per_setting: Some(data.shots_per_setting()),
        tuples: data
            .tuples()
            .iter()
            .map(|t| TupleFile {
                settings: t.settings,
                counts: OUTCOME_LABELS
                    .iter()
                    .map(|l| l.to_string())
                    .zip(t.counts)
                    .collect(),
            })
            .collect(),
    }
}

pub fn dataset_to_json(data: &Dataset) -> serde_json::Value {
    serde_json::to_value(dataset_to_file(data)).expect("dataset serializes")
}

pub fn write_dataset<W: Write>(writer: W, data: &Dataset) -> Result<()> {
    serde_json::to_writer_pretty(writer, &dataset_to_file(data)).map_err(std::io::Error::from)?;
    Ok(())
}

#[derive(Serialize, Deserialize)]
struct CsvRow {
    i: usize,
    j: usize,
    k: usize,
    #[serde(rename = "E")]
    e: f64,
    stderr: f64,
}

/// Reads a correlation table. The shape is inferred from the largest
/// indices and every tuple of it must appear exactly once.
pub fn read_estimates_csv<R: Read>(reader: R) -> Result<EstimateTable> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut rows = Vec::new();
    for (n, rec) in rdr.deserialize::<CsvRow>().enumerate() {
        let row = rec.map_err(|e| schema(format!("row {}", n + 1), e.to_string()))?;
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(schema("row 1", "no data rows"));
    }
    let shape = [
        rows.iter().map(|r| r.i).max().unwrap_or(0) + 1,
        rows.iter().map(|r| r.j).max().unwrap_or(0) + 1,
        rows.iter().map(|r| r.k).max().unwrap_or(0) + 1,
    ];
    let mut entries: Vec<Option<CorrelationEstimate>> = vec![None; tuple_count(shape)];
    for (n, r) in rows.iter().enumerate() {
        let est = CorrelationEstimate::imported(r.e, r.stderr)
            .map_err(|e| schema(format!("row {}", n + 1), e.to_string()))?;
        let slot = &mut entries[tuple_index(shape, [r.i, r.j, r.k])];
        if slot.replace(est).is_some() {
            return Err(schema(
                format!("row {}", n + 1),
                format!("tuple ({}, {}, {}) repeated", r.i, r.j, r.k),
            ));
        }
    }
    let entries = entries
        .into_iter()
        .enumerate()
        .map(|(i, e)| {
            e.ok_or_else(|| {
                schema(
                    "rows",
                    format!("missing tuple {:?}", crate::bell::tuple_at(shape, i)),
                )
            })
        })
        .collect::<Result<Vec<_>>>()?;
    EstimateTable::new(shape, entries)
}

pub fn write_estimates_csv<W: Write>(writer: W, table: &EstimateTable) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for (idx, e) in table.entries().iter().enumerate() {
        let [i, j, k] = crate::bell::tuple_at(table.shape(), idx);
        w.serialize(CsvRow {
            i,
            j,
            k,
            e: e.mean,
            stderr: e.stderr,
        })
        .map_err(|e| Error::Io(e.into()))?;
    }
    w.flush()?;
    Ok(())
}
