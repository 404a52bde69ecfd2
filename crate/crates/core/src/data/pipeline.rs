use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{load_csv, make_windows, split_chronological, synth_generate, RawSeries, Schema, StandardScaler, SynthSpec, WindowedDataset};
use crate::error::{Error, Result};

/// Where the rows come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DataSource {
    Csv { path: PathBuf, schema: Schema },
    Synth { spec: SynthSpec },
}

impl DataSource {
    pub fn load(&self) -> Result<RawSeries> {
        match self {
            DataSource::Csv { path, schema } => load_csv(path, schema),
            DataSource::Synth { spec } => synth_generate(spec),
        }
    }
}

/// Half-open row ranges of each split within the preprocessed series.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitBounds {
    pub train: [usize; 2],
    pub val: [usize; 2],
    pub test: [usize; 2],
}

/// Everything needed to rebuild a prepared dataset exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub source: DataSource,
    pub columns: Vec<String>,
    pub inputs: Vec<String>,
    pub target: String,
    pub categories: BTreeMap<String, Vec<String>>,
    pub trimmed_head: usize,
    pub rows: usize,
    pub fractions: [f64; 3],
    pub splits: SplitBounds,
    pub scaler: StandardScaler,
    pub input_len: usize,
    pub output_len: usize,
    pub stride: usize,
    /// Window counts for train, val and test.
    pub windows: [usize; 3],
}

impl DatasetManifest {
    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }

    /// Re-runs the pipeline and checks it lands on the recorded scaler and
    /// split boundaries.
    pub fn reproduce(&self) -> Result<PreparedData> {
        let data = prepare(&self.source, self.fractions, self.input_len, self.output_len, self.stride)?;
        if data.manifest.scaler != self.scaler || data.manifest.splits != self.splits || data.manifest.columns != self.columns {
            return Err(Error::SchemaMismatch(
                "source data no longer matches the dataset manifest".into(),
            ));
        }
        Ok(data)
    }
}

/// Standardized train/validation/test windows plus their manifest.
#[derive(Debug, Clone)]
pub struct PreparedData {
    pub train: WindowedDataset,
    pub val: WindowedDataset,
    pub test: WindowedDataset,
    pub scaler: StandardScaler,
    pub manifest: DatasetManifest,
}

impl PreparedData {
    pub fn split(&self, name: &str) -> Result<&WindowedDataset> {
        match name {
            "train" => Ok(&self.train),
            "val" => Ok(&self.val),
            "test" => Ok(&self.test),
            other => Err(Error::Precondition(format!(
                "unknown split `{other}` (expected train, val or test)"
            ))),
        }
    }
}

/// Load → split chronologically → fit the scaler on train → standardize all
/// three splits → window each split independently.
pub fn prepare(
    source: &DataSource,
    fractions: [f64; 3],
    input_len: usize,
    output_len: usize,
    stride: usize,
) -> Result<PreparedData> {
    let series = source.load()?;
    let (train, val, test) = split_chronological(&series, fractions, input_len + output_len)?;
    let scaler = StandardScaler::fit(&train)?;
    let window = |s: &RawSeries| -> Result<WindowedDataset> {
        Ok(make_windows(&scaler.transform(s)?, input_len, output_len, stride)?.with_scaler(scaler.clone()))
    };
    let (tw, vw, sw) = (window(&train)?, window(&val)?, window(&test)?);
    let (a, b) = (train.len(), train.len() + val.len());
    let manifest = DatasetManifest {
        source: source.clone(),
        columns: series.columns.clone(),
        inputs: series.inputs.clone(),
        target: series.target.clone(),
        categories: series.categories.clone(),
        trimmed_head: series.trimmed_head,
        rows: series.len(),
        fractions,
        splits: SplitBounds {
            train: [0, a],
            val: [a, b],
            test: [b, series.len()],
        },
        scaler: scaler.clone(),
        input_len,
        output_len,
        stride,
        windows: [tw.len(), vw.len(), sw.len()],
    };
    Ok(PreparedData {
        train: tw,
        val: vw,
        test: sw,
        scaler,
        manifest,
    })
}
