//! CSV ingestion, chronological splits, standardization, windowing and the
//! planted-relevance synthetic generator.

mod pipeline;
mod scaler;
mod synth;
mod windows;


use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

pub use pipeline::{prepare, DataSource, DatasetManifest, PreparedData, SplitBounds};
pub use scaler::StandardScaler;
pub use synth::{synth_generate, SynthSpec};
pub use windows::{make_windows, Provenance, Window, WindowedDataset};

use crate::error::{Error, Result};

/// Cell values treated as missing.
const MISSING: [&str; 4] = ["", "NA", "NaN", "nan"];

fn default_delimiter() -> char {
    ','
}

/// How to read a CSV file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Schema {
    pub target: String,
    /// Columns whose text values are mapped to integer codes.
    #[serde(default)]
    pub categorical: Vec<String>,
    /// Columns discarded after reading.
    #[serde(default)]
    pub drop: Vec<String>,
    /// Model inputs in order. Defaults to every kept column, target included.
    #[serde(default)]
    pub inputs: Option<Vec<String>>,
    #[serde(default = "default_delimiter")]
    pub delimiter: char,
}

impl Schema {
    pub fn new(target: impl Into<String>) -> Self {
        Schema {
            target: target.into(),
            categorical: Vec::new(),
            drop: Vec::new(),
            inputs: None,
            delimiter: default_delimiter(),
        }
    }
}

/// A time-ordered table of reals with named columns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawSeries {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
    pub target: String,
    /// Input column names, in model order.
    pub inputs: Vec<String>,
    /// Category labels per categorical column; a label's code is its index.
    pub categories: BTreeMap<String, Vec<String>>,
    /// Leading rows removed because the target was missing.
    pub trimmed_head: usize,
    pub source: String,
    pub split: String,
}

impl RawSeries {
    /// Builds a series, checking that every row has one value per column
    /// and that the target and inputs exist.
    pub fn new(columns: Vec<String>, rows: Vec<Vec<f64>>, target: &str, inputs: Vec<String>) -> Result<Self> {
        if let Some((i, _)) = rows.iter().enumerate().find(|(_, r)| r.len() != columns.len()) {
            return Err(Error::Precondition(format!(
                "row {i} has {} values for {} columns",
                rows[i].len(),
                columns.len()
            )));
        }
        let s = RawSeries {
            columns,
            rows,
            target: target.to_string(),
            inputs,
            categories: BTreeMap::new(),
            trimmed_head: 0,
            source: "memory".into(),
            split: "full".into(),
        };
        s.target_index()?;
        s.input_indices()?;
        Ok(s)
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn column_index(&self, name: &str) -> Result<usize> {
        self.columns
            .iter()
            .position(|c| c == name)
            .ok_or_else(|| Error::UnknownColumn(name.to_string()))
    }

    pub fn target_index(&self) -> Result<usize> {
        self.column_index(&self.target)
    }

    pub fn input_indices(&self) -> Result<Vec<usize>> {
        self.inputs.iter().map(|c| self.column_index(c)).collect()
    }

    pub fn column(&self, name: &str) -> Result<Vec<f64>> {
        let j = self.column_index(name)?;
        Ok(self.rows.iter().map(|r| r[j]).collect())
    }

    /// Rows `start..end` as a new series labelled `split`.
    pub fn slice(&self, start: usize, end: usize, split: &str) -> RawSeries {
        RawSeries {
            rows: self.rows[start..end].to_vec(),
            split: split.to_string(),
            ..self.clone_meta()
        }
    }

    fn clone_meta(&self) -> RawSeries {
        RawSeries {
            columns: self.columns.clone(),
            rows: Vec::new(),
            target: self.target.clone(),
            inputs: self.inputs.clone(),
            categories: self.categories.clone(),
            trimmed_head: self.trimmed_head,
            source: self.source.clone(),
            split: self.split.clone(),
        }
    }
}

/// Reads a CSV file with a header row.
///
/// Categorical columns are coded by first appearance. Leading rows whose
/// target is missing are dropped; any other missing cell takes the value
/// above it. Rows in error messages are 1-based file lines (the header is
/// line 1).
pub fn load_csv(path: &Path, schema: &Schema) -> Result<RawSeries> {
    if !schema.delimiter.is_ascii() {
        return Err(Error::Precondition(format!(
            "delimiter {:?} must be a single ASCII character",
            schema.delimiter
        )));
    }
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(schema.delimiter as u8)
        .has_headers(true)
        .from_path(path)
        .map_err(|e| match e.kind() {
            csv::ErrorKind::Io(_) => match e.into_kind() {
                csv::ErrorKind::Io(io) => Error::io(path, io),
                _ => unreachable!(),
            },
            _ => Error::Csv(e),
        })?;
    let header: Vec<String> = reader.headers()?.iter().map(|h| h.trim().to_string()).collect();
    if header.iter().all(|h| h.is_empty()) {
        return Err(Error::Empty(format!("{} has no header row", path.display())));
    }
    let find = |name: &str| {
        header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::UnknownColumn(name.to_string()))
    };
    find(&schema.target)?;
    for c in schema.categorical.iter().chain(&schema.drop) {
        find(c)?;
    }
    if schema.drop.contains(&schema.target) {
        return Err(Error::Precondition(format!("target `{}` cannot be dropped", schema.target)));
    }
    let kept: Vec<usize> = (0..header.len()).filter(|&j| !schema.drop.contains(&header[j])).collect();
    let columns: Vec<String> = kept.iter().map(|&j| header[j].clone()).collect();
    let inputs = match &schema.inputs {
        Some(list) => {
            for c in list {
                if !columns.contains(c) {
                    return Err(Error::UnknownColumn(c.clone()));
                }
            }
            list.clone()
        }
        None => columns.clone(),
    };
    let categorical: Vec<bool> = columns.iter().map(|c| schema.categorical.contains(c)).collect();
    let target_col = columns.iter().position(|c| *c == schema.target).expect("target kept");

    let mut labels: Vec<Vec<String>> = vec![Vec::new(); columns.len()];
    let mut cells: Vec<(usize, Vec<Option<f64>>)> = Vec::new();
    for record in reader.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        let mut row = Vec::with_capacity(kept.len());
        for (k, &j) in kept.iter().enumerate() {
            let raw = record.get(j).unwrap_or("").trim();
            if MISSING.contains(&raw) {
                row.push(None);
            } else if categorical[k] {
                let code = match labels[k].iter().position(|l| l == raw) {
                    Some(c) => c,
                    None => {
                        labels[k].push(raw.to_string());
                        labels[k].len() - 1
                    }
                };
                row.push(Some(code as f64));
            } else {
                let v: f64 = raw.parse().map_err(|_| Error::Parse {
                    row: line,
                    column: columns[k].clone(),
                    value: raw.to_string(),
                })?;
                if !v.is_finite() {
                    return Err(Error::Parse {
                        row: line,
                        column: columns[k].clone(),
                        value: raw.to_string(),
                    });
                }
                row.push(Some(v));
            }
        }
        cells.push((line, row));
    }
    if cells.is_empty() {
        return Err(Error::Empty(format!("{} has no data rows", path.display())));
    }
    let trimmed_head = cells.iter().take_while(|(_, r)| r[target_col].is_none()).count();
    if trimmed_head == cells.len() {
        return Err(Error::Empty(format!(
            "{}: target `{}` is missing on every row",
            path.display(),
            schema.target
        )));
    }
    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(cells.len() - trimmed_head);
    for (line, row) in &cells[trimmed_head..] {
        let mut filled = Vec::with_capacity(row.len());
        for (k, v) in row.iter().enumerate() {
            filled.push(match (v, rows.last()) {
                (Some(v), _) => *v,
                (None, Some(prev)) => prev[k],
                (None, None) => {
                    return Err(Error::MissingValue {
                        row: *line,
                        column: columns[k].clone(),
                    })
                }
            });
        }
        rows.push(filled);
    }
    let categories = columns
        .iter()
        .zip(labels)
        .zip(&categorical)
        .filter(|(_, is_cat)| **is_cat)
        .map(|((c, l), _)| (c.clone(), l))
        .collect();
    Ok(RawSeries {
        columns,
        rows,
        target: schema.target.clone(),
        inputs,
        categories,
        trimmed_head,
        source: path.display().to_string(),
        split: "full".into(),
    })
}

/// Row counts of a chronological split: `floor(f·rows)` for train and
/// validation, the remainder for test.
pub fn split_sizes(rows: usize, fractions: [f64; 3]) -> Result<[usize; 3]> {
    if fractions.iter().any(|f| !f.is_finite() || *f <= 0.0) {
        return Err(Error::Precondition(format!("split fractions must be positive, got {fractions:?}")));
    }
    let total: f64 = fractions.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::Precondition(format!("split fractions must sum to 1, got {total}")));
    }
    // the epsilon keeps 0.6 · 43800 from flooring to 26279
    let take = |f: f64| ((f * rows as f64) + 1e-9).floor() as usize;
    let train = take(fractions[0]);
    let val = take(fractions[1]).min(rows - train);
    Ok([train, val, rows - train - val])
}

/// Contiguous train/validation/test segments in file order. Each segment
/// must hold at least `min_rows` rows (one window's worth).
pub fn split_chronological(
    series: &RawSeries,
    fractions: [f64; 3],
    min_rows: usize,
) -> Result<(RawSeries, RawSeries, RawSeries)> {
    let [a, b, c] = split_sizes(series.len(), fractions)?;
    for (name, n) in [("train", a), ("val", b), ("test", c)] {
        if n < min_rows.max(1) {
            return Err(Error::TooShort(format!(
                "{name} split has {n} rows, needs at least {}",
                min_rows.max(1)
            )));
        }
    }
    Ok((
        series.slice(0, a, "train"),
        series.slice(a, a + b, "val"),
        series.slice(a + b, a + b + c, "test"),
    ))
}
