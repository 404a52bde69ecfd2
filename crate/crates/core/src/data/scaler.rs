use serde::{Deserialize, Serialize};

use super::RawSeries;
use crate::error::{Error, Result};

/// Per-column z-scoring with population statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StandardScaler {
    pub columns: Vec<String>,
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl StandardScaler {
    /// Fits on every column of `train`. A column with zero spread is rejected.
    pub fn fit(train: &RawSeries) -> Result<Self> {
        if train.is_empty() {
            return Err(Error::Empty("cannot fit a scaler on zero rows".into()));
        }
        let n = train.len() as f64;
        let width = train.columns.len();
        let mut mean = vec![0.0; width];
        for row in &train.rows {
            for (m, v) in mean.iter_mut().zip(row) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; width];
        for row in &train.rows {
            for ((s, v), m) in var.iter_mut().zip(row).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        let std: Vec<f64> = var.iter().map(|s| (s / n).sqrt()).collect();
        for (j, s) in std.iter().enumerate() {
            // relative floor so float noise on a constant column still counts as constant
            if *s <= 1e-12 * mean[j].abs().max(1.0) {
                return Err(Error::ConstantColumn(train.columns[j].clone()));
            }
        }
        Ok(StandardScaler {
            columns: train.columns.clone(),
            mean,
            std,
        })
    }

    fn check(&self, series: &RawSeries) -> Result<()> {
        if series.columns != self.columns {
            return Err(Error::SchemaMismatch(format!(
                "scaler columns {:?} differ from series columns {:?}",
                self.columns, series.columns
            )));
        }
        Ok(())
    }

    pub fn transform(&self, series: &RawSeries) -> Result<RawSeries> {
        self.check(series)?;
        let mut out = series.clone();
        for row in &mut out.rows {
            for ((v, m), s) in row.iter_mut().zip(&self.mean).zip(&self.std) {
                *v = (*v - m) / s;
            }
        }
        Ok(out)
    }

    pub fn inverse_transform(&self, series: &RawSeries) -> Result<RawSeries> {
        self.check(series)?;
        let mut out = series.clone();
        for row in &mut out.rows {
            for ((v, m), s) in row.iter_mut().zip(&self.mean).zip(&self.std) {
                *v = *v * s + m;
            }
        }
        Ok(out)
    }

    /// `(mean, std)` of one column.
    pub fn column_params(&self, name: &str) -> Result<(f64, f64)> {
        let j = self
            .columns
            .iter()
            .position(|c| c == name)
            .ok_or_else(|| Error::UnknownColumn(name.to_string()))?;
        Ok((self.mean[j], self.std[j]))
    }
}
