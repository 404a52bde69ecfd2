use serde::{Deserialize, Serialize};

use super::{RawSeries, StandardScaler};
use crate::autodiff::Tensor;
use crate::error::{Error, Result};

/// One example: `x` is N×Tx (row i is input variable i), `y` the next Ty
/// target values.
#[derive(Debug, Clone, PartialEq)]
pub struct Window {
    pub x: Tensor,
    pub y: Vec<f64>,
    /// Row index of the first input step within the source series.
    pub start: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub source: String,
    pub split: String,
    pub input_len: usize,
    pub output_len: usize,
    pub stride: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WindowedDataset {
    pub windows: Vec<Window>,
    pub input_names: Vec<String>,
    pub target: String,
    /// The scaler the series was standardized with, if any.
    pub scaler: Option<StandardScaler>,
    pub provenance: Provenance,
}

impl WindowedDataset {
    pub fn len(&self) -> usize {
        self.windows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.windows.is_empty()
    }

    pub fn n_vars(&self) -> usize {
        self.input_names.len()
    }

    /// Maps a standardized target value back to original units.
    pub fn target_to_original(&self, v: f64) -> f64 {
        match &self.scaler {
            Some(s) => {
                let (m, sd) = s.column_params(&self.target).expect("scaler covers the target");
                v * sd + m
            }
            None => v,
        }
    }

    pub fn with_scaler(mut self, scaler: StandardScaler) -> Self {
        self.scaler = Some(scaler);
        self
    }
}

/// Slides a window over `series`: `floor((rows − Tx − Ty)/stride) + 1`
/// windows, X from rows `t..t+Tx`, y the target at rows `t+Tx..t+Tx+Ty`.
pub fn make_windows(series: &RawSeries, input_len: usize, output_len: usize, stride: usize) -> Result<WindowedDataset> {
    if input_len == 0 || output_len == 0 || stride == 0 {
        return Err(Error::Precondition(format!(
            "Tx ({input_len}), Ty ({output_len}) and stride ({stride}) must be at least 1"
        )));
    }
    let rows = series.len();
    if rows < input_len + output_len {
        return Err(Error::TooShort(format!(
            "{} split has {rows} rows, a window needs {}",
            series.split,
            input_len + output_len
        )));
    }
    let inputs = series.input_indices()?;
    let target = series.target_index()?;
    let count = (rows - input_len - output_len) / stride + 1;
    let n = inputs.len();
    let mut windows = Vec::with_capacity(count);
    for w in 0..count {
        let t = w * stride;
        let mut x = Vec::with_capacity(n * input_len);
        for &col in &inputs {
            x.extend(series.rows[t..t + input_len].iter().map(|r| r[col]));
        }
        let y = series.rows[t + input_len..t + input_len + output_len]
            .iter()
            .map(|r| r[target])
            .collect();
        windows.push(Window {
            x: Tensor::matrix(n, input_len, x)?,
            y,
            start: t,
        });
    }
    Ok(WindowedDataset {
        windows,
        input_names: series.inputs.clone(),
        target: series.target.clone(),
        scaler: None,
        provenance: Provenance {
            source: series.source.clone(),
            split: series.split.clone(),
            input_len,
            output_len,
            stride,
        },
    })
}
