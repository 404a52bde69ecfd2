use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::data::DataSource;
use crate::error::{Error, Result};
use crate::models::{Arch, ModelConfig};
use crate::training::TrainConfig;

fn default_enc() -> usize {
    32
}
fn default_ctx() -> usize {
    4
}
fn default_dropout() -> f64 {
    0.2
}
fn default_split() -> [f64; 3] {
    [0.6, 0.2, 0.2]
}
fn default_one() -> usize {
    1
}

/// Model section of an experiment. `n_vars` comes from the data when absent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub arch: Arch,
    #[serde(default)]
    pub n_vars: Option<usize>,
    pub input_len: usize,
    pub output_len: usize,
    #[serde(default = "default_enc")]
    pub enc_dim: usize,
    #[serde(default = "default_enc")]
    pub dec_dim: usize,
    #[serde(default = "default_ctx")]
    pub context_dim: usize,
    #[serde(default = "default_dropout")]
    pub dropout_rate: f64,
    #[serde(default)]
    pub per_variable_embedding: bool,
}

impl ModelSpec {
    pub fn to_config(&self, n_vars: usize, seed: u64) -> ModelConfig {
        ModelConfig {
            arch: self.arch,
            n_vars,
            input_len: self.input_len,
            output_len: self.output_len,
            enc_dim: self.enc_dim,
            dec_dim: self.dec_dim,
            context_dim: self.context_dim,
            dropout_rate: self.dropout_rate,
            seed,
            per_variable_embedding: self.per_variable_embedding,
        }
    }
}

/// Settings for `bench`: every architecture in `archs` is timed at every
/// encoder/decoder width in `widths`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchSpec {
    #[serde(default = "default_archs")]
    pub archs: Vec<Arch>,
    /// Values used for both m and p. Defaults to the model's `enc_dim`.
    #[serde(default)]
    pub widths: Vec<usize>,
    /// Timed repetitions; the median is reported.
    #[serde(default = "default_three")]
    pub repeats: usize,
    /// Caps the windows timed per split.
    #[serde(default)]
    pub max_windows: Option<usize>,
}

fn default_archs() -> Vec<Arch> {
    vec![Arch::Stam, Arch::StamLite]
}
fn default_three() -> usize {
    3
}

impl Default for BenchSpec {
    fn default() -> Self {
        BenchSpec {
            archs: default_archs(),
            widths: Vec::new(),
            repeats: default_three(),
            max_windows: None,
        }
    }
}

/// One experiment: data, model, training protocol and run seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub data: DataSource,
    pub model: ModelSpec,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default = "default_split")]
    pub split: [f64; 3],
    #[serde(default = "default_one")]
    pub stride: usize,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(default = "default_one")]
    pub repeat: usize,
    /// One seed per run; `0 … repeat−1` when empty.
    #[serde(default)]
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub bench: Option<BenchSpec>,
}

impl ExperimentConfig {
    /// Every field-level problem, each naming its field.
    pub fn problems(&self) -> Vec<String> {
        let mut out = Vec::new();
        if let DataSource::Synth { spec } = &self.data {
            out.extend(spec.problems("data.spec."));
        }
        let probe = self.model.to_config(self.model.n_vars.unwrap_or(1), 0);
        out.extend(probe.problems("model."));
        out.extend(self.train.problems("train."));
        if self.split.iter().any(|f| !(*f > 0.0)) || (self.split.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            out.push(format!("split must be three positive fractions summing to 1, got {:?}", self.split));
        }
        if self.stride == 0 {
            out.push("stride must be at least 1".into());
        }
        if self.repeat == 0 {
            out.push("repeat must be at least 1".into());
        }
        if !self.seeds.is_empty() && self.seeds.len() != self.repeat {
            out.push(format!(
                "seeds lists {} seeds but repeat is {}",
                self.seeds.len(),
                self.repeat
            ));
        }
        let mut sorted = self.seeds.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != self.seeds.len() {
            out.push("seeds must be distinct".into());
        }
        if let Some(b) = &self.bench {
            if b.archs.is_empty() {
                out.push("bench.archs must name at least one architecture".into());
            }
            if b.widths.contains(&0) {
                out.push("bench.widths entries must be at least 1".into());
            }
            if b.repeats == 0 {
                out.push("bench.repeats must be at least 1".into());
            }
            if b.max_windows == Some(0) {
                out.push("bench.max_windows must be at least 1".into());
            }
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        let p = self.problems();
        if p.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidConfig(p))
        }
    }

    pub fn run_seeds(&self) -> Vec<u64> {
        if self.seeds.is_empty() {
            (0..self.repeat as u64).collect()
        } else {
            self.seeds.clone()
        }
    }

    /// Reads a config, applies `key=value` overrides, resolves relative
    /// data paths against the config file's directory and validates.
    pub fn load(path: &Path, overrides: &[String]) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::InvalidConfig(vec![format!("cannot read {}: {e}", path.display())]))?;
        let value: Value = serde_json::from_str(&text)
            .map_err(|e| Error::InvalidConfig(vec![format!("{} is not valid JSON: {e}", path.display())]))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::from_value(value, overrides, base)
    }

    pub fn from_value(mut value: Value, overrides: &[String], base: &Path) -> Result<Self> {
        for o in overrides {
            apply_override(&mut value, o)?;
        }
        let mut cfg: ExperimentConfig =
            serde_json::from_value(value).map_err(|e| Error::InvalidConfig(vec![e.to_string()]))?;
        if let DataSource::Csv { path, .. } = &mut cfg.data {
            if path.is_relative() {
                *path = base.join(&*path);
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Sets a dotted key (`train.epochs=2`) in a JSON document. The value is
/// parsed as JSON, falling back to a plain string.
pub fn apply_override(doc: &mut Value, assignment: &str) -> Result<()> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| Error::InvalidConfig(vec![format!("override `{assignment}` is not key=value")]))?;
    let key = key.trim();
    if key.is_empty() || key.split('.').any(str::is_empty) {
        return Err(Error::InvalidConfig(vec![format!("override `{assignment}` has an empty key segment")]));
    }
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let mut node = doc;
    let parts: Vec<&str> = key.split('.').collect();
    for (k, part) in parts.iter().enumerate() {
        if !node.is_object() {
            return Err(Error::InvalidConfig(vec![format!(
                "override `{key}`: `{}` is not an object",
                parts[..k].join(".")
            )]));
        }
        let map = node.as_object_mut().expect("checked object");
        if k + 1 == parts.len() {
            map.insert(part.to_string(), value);
            return Ok(());
        }
        node = map.entry(part.to_string()).or_insert_with(|| Value::Object(Default::default()));
    }
    unreachable!("loop returns on the last segment")
}

#[cfg(test)]
mod tests {
    use serde_json::json;

    use super::*;

    fn base() -> Value {
        json!({
            "data": {"kind": "synth", "spec": {"n_vars": 3, "length": 200, "relevant": [0], "lag": 1, "noise_std": 0.1, "seed": 1}},
            "model": {"arch": "stam", "input_len": 5, "output_len": 2, "enc_dim": 8, "dec_dim": 8},
            "train": {"epochs": 2}
        })
    }

    #[test]
    fn defaults_fill_in() {
        let c = ExperimentConfig::from_value(base(), &[], Path::new(".")).unwrap();
        assert_eq!(c.split, [0.6, 0.2, 0.2]);
        assert_eq!(c.train.batch_size, 256);
        assert_eq!(c.train.learning_rate, 0.001);
        assert_eq!(c.model.context_dim, 4);
        assert_eq!(c.run_seeds(), vec![0]);
    }

    #[test]
    fn overrides_apply() {
        let c = ExperimentConfig::from_value(
            base(),
            &["train.epochs=7".into(), "model.arch=stam_lite".into(), "seeds=[4,5]".into(), "repeat=2".into()],
            Path::new("."),
        )
        .unwrap();
        assert_eq!(c.train.epochs, 7);
        assert_eq!(c.model.arch, Arch::StamLite);
        assert_eq!(c.run_seeds(), vec![4, 5]);
    }

    #[test]
    fn every_problem_is_named() {
        let err = ExperimentConfig::from_value(
            base(),
            &[
                "train.learning_rate=-1".into(),
                "model.output_len=0".into(),
                "data.spec.lag=0".into(),
                "repeat=2".into(),
                "seeds=[1]".into(),
            ],
            Path::new("."),
        )
        .unwrap_err();
        let Error::InvalidConfig(p) = err else { panic!() };
        for field in ["train.learning_rate", "model.output_len", "data.spec.lag", "seeds"] {
            assert!(p.iter().any(|m| m.contains(field)), "{field} missing from {p:?}");
        }
    }

    #[test]
    fn bad_overrides_and_unknown_fields() {
        assert!(matches!(
            ExperimentConfig::from_value(base(), &["nonsense".into()], Path::new(".")),
            Err(Error::InvalidConfig(_))
        ));
        assert!(matches!(
            ExperimentConfig::from_value(base(), &["model.typo=3".into()], Path::new(".")),
            Err(Error::InvalidConfig(_))
        ));
        assert!(matches!(
            ExperimentConfig::from_value(base(), &["train.epochs.x=3".into()], Path::new(".")),
            Err(Error::InvalidConfig(_))
        ));
    }

    #[test]
    fn relative_csv_paths_follow_the_config() {
        let v = json!({
            "data": {"kind": "csv", "path": "d.csv", "schema": {"target": "y"}},
            "model": {"arch": "stam", "input_len": 5, "output_len": 4}
        });
        let c = ExperimentConfig::from_value(v, &[], Path::new("/etc/exp")).unwrap();
        let DataSource::Csv { path, .. } = c.data else { panic!() };
        assert_eq!(path, PathBuf::from("/etc/exp/d.csv"));
    }
}
