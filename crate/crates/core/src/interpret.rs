//! Dataset-level attention summaries and their JSON/CSV export.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::data::WindowedDataset;
use crate::error::{Error, Result};
use crate::models::{AttentionRecord, Model};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpatialEntry {
    pub name: String,
    /// Mean weight × 100.
    pub percent: f64,
    /// Population standard deviation of the weight × 100.
    pub std: f64,
    /// 1 for the largest mean weight; ties keep dataset order.
    pub rank: usize,
}

/// Mean spatial weight per variable, in dataset order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpatialReport {
    pub variables: Vec<SpatialEntry>,
    pub windows: usize,
    /// Percentages broken down by row index of the records (output step,
    /// or encoder step for DA-RNN).
    pub per_step: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TemporalEntry {
    /// Input step, 1-based.
    pub step: usize,
    pub percent: f64,
    pub std: f64,
    pub rank: usize,
}

/// Mean temporal weight per input step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TemporalReport {
    pub steps: Vec<TemporalEntry>,
    pub windows: usize,
    /// Percentages broken down by output step.
    pub per_step: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttentionReport {
    pub spatial: Option<SpatialReport>,
    pub temporal: Option<TemporalReport>,
}

impl SpatialReport {
    pub fn percents(&self) -> Vec<f64> {
        self.variables.iter().map(|v| v.percent).collect()
    }

    /// Variable names from largest to smallest mean weight.
    pub fn ranked_names(&self) -> Vec<&str> {
        let mut v: Vec<&SpatialEntry> = self.variables.iter().collect();
        v.sort_by_key(|e| e.rank);
        v.into_iter().map(|e| e.name.as_str()).collect()
    }
}

impl TemporalReport {
    pub fn percents(&self) -> Vec<f64> {
        self.steps.iter().map(|s| s.percent).collect()
    }
}

struct Summary {
    mean: Vec<f64>,
    std: Vec<f64>,
    per_step: Vec<Vec<f64>>,
}

/// Averages every row of every record, uniformly. All records must have the
/// same number of rows and every row the same width.
fn summarize<'a>(rows_per_record: impl Iterator<Item = &'a Vec<Vec<f64>>>, what: &str) -> Result<(Summary, usize)> {
    let records: Vec<&Vec<Vec<f64>>> = rows_per_record.collect();
    if records.is_empty() {
        return Err(Error::Empty(format!("no {what} attention records")));
    }
    let steps = records[0].len();
    if steps == 0 {
        return Err(Error::Empty(format!("records carry no {what} attention")));
    }
    let width = records[0][0].len();
    for (k, r) in records.iter().enumerate() {
        if r.len() != steps || r.iter().any(|row| row.len() != width) {
            return Err(Error::Precondition(format!(
                "{what} record {k} does not match the {steps}×{width} layout of record 0"
            )));
        }
    }
    let n = records.len() as f64;
    let mut per_step = vec![vec![0.0; width]; steps];
    for r in &records {
        for (acc, row) in per_step.iter_mut().zip(r.iter()) {
            for (a, v) in acc.iter_mut().zip(row) {
                *a += v;
            }
        }
    }
    per_step.iter_mut().flatten().for_each(|a| *a /= n);
    let mean: Vec<f64> = (0..width)
        .map(|i| per_step.iter().map(|row| row[i]).sum::<f64>() / steps as f64)
        .collect();
    let total = n * steps as f64;
    let std: Vec<f64> = (0..width)
        .map(|i| {
            let ss: f64 = records
                .iter()
                .flat_map(|r| r.iter())
                .map(|row| (row[i] - mean[i]).powi(2))
                .sum();
            (ss / total).sqrt()
        })
        .collect();
    Ok((
        Summary {
            mean,
            std,
            per_step,
        },
        records.len(),
    ))
}

fn ranks(values: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));
    let mut rank = vec![0; values.len()];
    for (r, &i) in order.iter().enumerate() {
        rank[i] = r + 1;
    }
    rank
}

fn percent(v: &[f64]) -> Vec<f64> {
    v.iter().map(|x| x * 100.0).collect()
}

/// Mean of β over every window and every record row, as percentages.
pub fn aggregate_spatial(records: &[AttentionRecord], names: &[String]) -> Result<SpatialReport> {
    let (s, windows) = summarize(records.iter().map(|r| &r.spatial), "spatial")?;
    if s.mean.len() != names.len() {
        return Err(Error::SchemaMismatch(format!(
            "{} variable names for {} spatial weights",
            names.len(),
            s.mean.len()
        )));
    }
    let pct = percent(&s.mean);
    let rank = ranks(&pct);
    Ok(SpatialReport {
        variables: names
            .iter()
            .enumerate()
            .map(|(i, name)| SpatialEntry {
                name: name.clone(),
                percent: pct[i],
                std: s.std[i] * 100.0,
                rank: rank[i],
            })
            .collect(),
        windows,
        per_step: s.per_step.iter().map(|r| percent(r)).collect(),
    })
}

/// Mean of α over every window and output step, as percentages.
pub fn aggregate_temporal(records: &[AttentionRecord]) -> Result<TemporalReport> {
    let (s, windows) = summarize(records.iter().map(|r| &r.temporal), "temporal")?;
    let pct = percent(&s.mean);
    let rank = ranks(&pct);
    Ok(TemporalReport {
        steps: (0..pct.len())
            .map(|t| TemporalEntry {
                step: t + 1,
                percent: pct[t],
                std: s.std[t] * 100.0,
                rank: rank[t],
            })
            .collect(),
        windows,
        per_step: s.per_step.iter().map(|r| percent(r)).collect(),
    })
}

/// Eval-mode attention records for every window of `data`.
pub fn collect_attention(model: &Model, data: &WindowedDataset) -> Result<Vec<AttentionRecord>> {
    data.windows.iter().map(|w| Ok(model.predict(&w.x)?.attention)).collect()
}

/// Runs `model` over `data` and aggregates whatever attention it produces.
pub fn explain(model: &Model, data: &WindowedDataset) -> Result<AttentionReport> {
    if !model.arch().has_attention() {
        return Err(Error::UnsupportedArch {
            op: "explain",
            arch: model.arch().to_string(),
        });
    }
    let records = collect_attention(model, data)?;
    let spatial = if model.arch().has_spatial_attention() {
        Some(aggregate_spatial(&records, &data.input_names)?)
    } else {
        None
    };
    Ok(AttentionReport {
        spatial,
        temporal: Some(aggregate_temporal(&records)?),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReportFormat {
    Json,
    Csv,
}

impl std::str::FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "json" => Ok(ReportFormat::Json),
            "csv" => Ok(ReportFormat::Csv),
            other => Err(Error::Precondition(format!("unknown report format `{other}` (json or csv)"))),
        }
    }
}

/// The file the temporal table goes to when CSV output also has a spatial
/// table: `<stem>_temporal.csv` next to `path`.
pub fn temporal_csv_path(path: &Path) -> PathBuf {
    let stem = path.file_stem().map_or_else(|| "report".into(), |s| s.to_string_lossy().into_owned());
    path.with_file_name(format!("{stem}_temporal.csv"))
}

/// Writes `report`. JSON is one file; CSV writes the spatial table to
/// `path` and the temporal table beside it (or to `path` when there is no
/// spatial table). Returns the files written.
pub fn export_report(report: &AttentionReport, path: &Path, format: ReportFormat) -> Result<Vec<PathBuf>> {
    match format {
        ReportFormat::Json => {
            let text = serde_json::to_string_pretty(report)?;
            fs::write(path, text).map_err(|e| Error::io(path, e))?;
            Ok(vec![path.to_path_buf()])
        }
        ReportFormat::Csv => {
            let mut written = Vec::new();
            if let Some(s) = &report.spatial {
                let mut w = csv::Writer::from_path(path).map_err(|e| csv_io(path, e))?;
                w.write_record(["variable", "percent", "std", "rank"])?;
                for v in &s.variables {
                    w.write_record([v.name.clone(), v.percent.to_string(), v.std.to_string(), v.rank.to_string()])?;
                }
                w.flush().map_err(|e| Error::io(path, e))?;
                written.push(path.to_path_buf());
            }
            if let Some(t) = &report.temporal {
                let target = if report.spatial.is_some() {
                    temporal_csv_path(path)
                } else {
                    path.to_path_buf()
                };
                let mut w = csv::Writer::from_path(&target).map_err(|e| csv_io(&target, e))?;
                w.write_record(["step", "percent", "std", "rank"])?;
                for s in &t.steps {
                    w.write_record([s.step.to_string(), s.percent.to_string(), s.std.to_string(), s.rank.to_string()])?;
                }
                w.flush().map_err(|e| Error::io(&target, e))?;
                written.push(target);
            }
            Ok(written)
        }
    }
}

fn csv_io(path: &Path, e: csv::Error) -> Error {
    if e.is_io_error() {
        match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::io(path, io),
            other => Error::Precondition(format!("{other:?}")),
        }
    } else {
        Error::Csv(e)
    }
}

pub fn load_report(path: &Path) -> Result<AttentionReport> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}
