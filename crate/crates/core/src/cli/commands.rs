use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::config::ExperimentConfig;
use crate::data::{prepare, synth_generate, DataSource, DatasetManifest, PreparedData, SynthSpec, WindowedDataset};
use crate::error::{Error, Result};
use crate::interpret::{explain, export_report, AttentionReport, ReportFormat};
use crate::models::{flop_estimate, load_weights, param_count, save_weights, Arch, Model};
use crate::training::{evaluate, fit_with_progress, Metrics, TrainConfig};

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

/// Mean and sample standard deviation (0 for a single run).
fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub seed: u64,
    /// Relative to the output directory.
    pub weights: PathBuf,
    pub log: PathBuf,
    pub val: Metrics,
    pub test: Metrics,
    pub train_seconds: f64,
    pub test_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricStats {
    pub mean: f64,
    pub std: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainSummary {
    pub arch: Arch,
    pub param_count: usize,
    pub windows: [usize; 3],
    pub runs: Vec<RunSummary>,
    pub test_rmse: MetricStats,
    pub test_mae: MetricStats,
    pub test_r2: MetricStats,
}

impl TrainSummary {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }
}

fn stats(runs: &[RunSummary], pick: impl Fn(&Metrics) -> f64) -> MetricStats {
    let (mean, std) = mean_std(&runs.iter().map(|r| pick(&r.test)).collect::<Vec<_>>());
    MetricStats { mean, std }
}

/// Trains one model per seed. Writes `config.json`, `dataset.json`,
/// `run-<seed>/{weights.stw, log.jsonl, metrics.json}` and `summary.json`
/// under `out`.
pub fn cmd_train(cfg: &ExperimentConfig, out: &Path, progress: &mut dyn Write) -> Result<TrainSummary> {
    cfg.validate()?;
    let data = prepare(&cfg.data, cfg.split, cfg.model.input_len, cfg.model.output_len, cfg.stride)?;
    let n_vars = data.train.n_vars();
    if let Some(n) = cfg.model.n_vars {
        if n != n_vars {
            return Err(Error::SchemaMismatch(format!(
                "model.n_vars is {n} but the data has {n_vars} input columns"
            )));
        }
    }
    create_dir(out)?;
    write_json(&out.join("config.json"), cfg)?;
    data.manifest.save(&out.join("dataset.json"))?;

    let mut runs = Vec::new();
    for seed in cfg.run_seeds() {
        let mut model = Model::new(cfg.model.to_config(n_vars, seed))?;
        let tc = TrainConfig { seed, ..cfg.train.clone() };
        let _ = writeln!(progress, "run seed={seed}: {} ({} parameters)", model.arch(), model.param_total());
        let started = Instant::now();
        let log = fit_with_progress(&mut model, &data.train, &data.val, &tc, |r| {
            let _ = writeln!(
                progress,
                "  epoch {:>3}  loss {:.5}  val rmse {:.4}  mae {:.4}  {:.1}s",
                r.epoch, r.train_loss, r.val_rmse, r.val_mae, r.seconds
            );
        })?;
        let train_seconds = started.elapsed().as_secs_f64();
        let val = evaluate(&model, &data.val)?;
        let t0 = Instant::now();
        let test = evaluate(&model, &data.test)?;
        let test_seconds = t0.elapsed().as_secs_f64();

        let dir_name = format!("run-{seed}");
        let dir = out.join(&dir_name);
        create_dir(&dir)?;
        save_weights(&model, &dir.join("weights.stw"))?;
        let log_path = dir.join("log.jsonl");
        fs::write(&log_path, log.to_jsonl()?).map_err(|e| Error::io(&log_path, e))?;
        let run = RunSummary {
            seed,
            weights: PathBuf::from(&dir_name).join("weights.stw"),
            log: PathBuf::from(&dir_name).join("log.jsonl"),
            val,
            test,
            train_seconds,
            test_seconds,
        };
        write_json(&dir.join("metrics.json"), &run)?;
        let _ = writeln!(
            progress,
            "  test rmse {:.4}  mae {:.4}  r2 {:.4}",
            test.rmse, test.mae, test.r2
        );
        runs.push(run);
    }
    let summary = TrainSummary {
        arch: cfg.model.arch,
        param_count: param_count(&cfg.model.to_config(n_vars, 0)),
        windows: data.manifest.windows,
        test_rmse: stats(&runs, |m| m.rmse),
        test_mae: stats(&runs, |m| m.mae),
        test_r2: stats(&runs, |m| m.r2),
        runs,
    };
    write_json(&out.join("summary.json"), &summary)?;
    Ok(summary)
}

/// Loads data from a dataset manifest written by `train`, or from an
/// experiment config.
pub fn load_data(path: &Path, overrides: &[String]) -> Result<PreparedData> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut value: Value = serde_json::from_str(&text)
        .map_err(|e| Error::InvalidConfig(vec![format!("{} is not valid JSON: {e}", path.display())]))?;
    if value.get("scaler").is_some() {
        for o in overrides {
            super::config::apply_override(&mut value, o)?;
        }
        let manifest: DatasetManifest =
            serde_json::from_value(value).map_err(|e| Error::InvalidConfig(vec![e.to_string()]))?;
        manifest.reproduce()
    } else {
        let base = path.parent().unwrap_or(Path::new("."));
        let cfg = ExperimentConfig::from_value(value, overrides, base)?;
        prepare(&cfg.data, cfg.split, cfg.model.input_len, cfg.model.output_len, cfg.stride)
    }
}

fn check_compatible(model: &Model, data: &WindowedDataset) -> Result<()> {
    let c = model.config();
    let p = &data.provenance;
    if c.n_vars != data.n_vars() || c.input_len != p.input_len || c.output_len != p.output_len {
        return Err(Error::SchemaMismatch(format!(
            "weights expect N={}, Tx={}, Ty={}; data has N={}, Tx={}, Ty={}",
            c.n_vars,
            c.input_len,
            c.output_len,
            data.n_vars(),
            p.input_len,
            p.output_len
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub arch: Arch,
    pub split: String,
    pub windows: usize,
    pub rmse: f64,
    pub mae: f64,
    pub r2: f64,
    /// Wall-clock seconds spent predicting the split.
    pub test_seconds: f64,
}

pub fn cmd_eval(weights: &Path, data: &Path, split: &str, overrides: &[String]) -> Result<EvalReport> {
    let model = load_weights(weights)?;
    let prepared = load_data(data, overrides)?;
    let set = prepared.split(split)?;
    check_compatible(&model, set)?;
    let started = Instant::now();
    let m = evaluate(&model, set)?;
    let test_seconds = started.elapsed().as_secs_f64();
    Ok(EvalReport {
        arch: model.arch(),
        split: split.to_string(),
        windows: set.len(),
        rmse: m.rmse,
        mae: m.mae,
        r2: m.r2,
        test_seconds,
    })
}

pub fn cmd_explain(
    weights: &Path,
    data: &Path,
    split: &str,
    overrides: &[String],
    out: &Path,
    format: ReportFormat,
) -> Result<(AttentionReport, Vec<PathBuf>)> {
    let model = load_weights(weights)?;
    if !model.arch().has_attention() {
        return Err(Error::UnsupportedArch {
            op: "explain",
            arch: model.arch().to_string(),
        });
    }
    let prepared = load_data(data, overrides)?;
    let set = prepared.split(split)?;
    check_compatible(&model, set)?;
    let report = explain(&model, set)?;
    create_dir(out)?;
    let name = match format {
        ReportFormat::Json => "attention.json",
        ReportFormat::Csv => "attention.csv",
    };
    let files = export_report(&report, &out.join(name), format)?;
    Ok((report, files))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub arch: Arch,
    pub enc_dim: usize,
    pub dec_dim: usize,
    pub context_dim: usize,
    pub param_count: usize,
    /// Absent for architectures without a cost model.
    pub flop_estimate: Option<u64>,
    pub train_seconds_per_epoch: f64,
    pub test_seconds: f64,
    pub train_windows: usize,
    pub test_windows: usize,
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn capped(data: &WindowedDataset, cap: Option<usize>) -> WindowedDataset {
    let mut d = data.clone();
    if let Some(c) = cap {
        d.windows.truncate(c);
    }
    d
}

/// Parameter count, FLOP estimate and median timings for each
/// architecture and width in the config's bench section.
pub fn cmd_bench(cfg: &ExperimentConfig, progress: &mut dyn Write) -> Result<Vec<BenchRow>> {
    cfg.validate()?;
    let bench = cfg.bench.clone().unwrap_or_default();
    let widths = if bench.widths.is_empty() {
        vec![cfg.model.enc_dim]
    } else {
        bench.widths.clone()
    };
    let data = prepare(&cfg.data, cfg.split, cfg.model.input_len, cfg.model.output_len, cfg.stride)?;
    let train = capped(&data.train, bench.max_windows);
    let test = capped(&data.test, bench.max_windows);
    let val = capped(&data.val, Some(1));
    let n_vars = train.n_vars();
    let tc = TrainConfig {
        epochs: 1,
        ..cfg.train.clone()
    };
    let mut rows = Vec::new();
    for &arch in &bench.archs {
        for &w in &widths {
            let spec = super::config::ModelSpec {
                arch,
                enc_dim: w,
                dec_dim: w,
                context_dim: cfg.model.context_dim.min(w),
                ..cfg.model.clone()
            };
            let mc = spec.to_config(n_vars, 0);
            let mut train_times = Vec::new();
            let mut test_times = Vec::new();
            for _ in 0..bench.repeats {
                let mut model = Model::new(mc.clone())?;
                let t0 = Instant::now();
                fit_with_progress(&mut model, &train, &val, &tc, |_| {})?;
                train_times.push(t0.elapsed().as_secs_f64());
                let t1 = Instant::now();
                for win in &test.windows {
                    model.predict(&win.x)?;
                }
                test_times.push(t1.elapsed().as_secs_f64());
            }
            let row = BenchRow {
                arch,
                enc_dim: w,
                dec_dim: w,
                context_dim: mc.context_dim,
                param_count: param_count(&mc),
                flop_estimate: flop_estimate(&mc).ok(),
                train_seconds_per_epoch: median(train_times),
                test_seconds: median(test_times),
                train_windows: train.len(),
                test_windows: test.len(),
            };
            let _ = writeln!(
                progress,
                "{:<9} m={:<4} params {:>8}  train {:.3}s/epoch  test {:.3}s",
                arch.name(),
                w,
                row.param_count,
                row.train_seconds_per_epoch,
                row.test_seconds
            );
            rows.push(row);
        }
    }
    Ok(rows)
}

pub fn write_bench(rows: &[BenchRow], out: &Path, format: ReportFormat) -> Result<PathBuf> {
    create_dir(out)?;
    match format {
        ReportFormat::Json => {
            let path = out.join("bench.json");
            write_json(&path, &rows)?;
            Ok(path)
        }
        ReportFormat::Csv => {
            let path = out.join("bench.csv");
            let mut w = csv::Writer::from_path(&path)?;
            w.write_record([
                "arch",
                "enc_dim",
                "dec_dim",
                "context_dim",
                "param_count",
                "flop_estimate",
                "train_seconds_per_epoch",
                "test_seconds",
                "train_windows",
                "test_windows",
            ])?;
            for r in rows {
                w.write_record([
                    r.arch.name().to_string(),
                    r.enc_dim.to_string(),
                    r.dec_dim.to_string(),
                    r.context_dim.to_string(),
                    r.param_count.to_string(),
                    r.flop_estimate.map_or(String::new(), |f| f.to_string()),
                    r.train_seconds_per_epoch.to_string(),
                    r.test_seconds.to_string(),
                    r.train_windows.to_string(),
                    r.test_windows.to_string(),
                ])?;
            }
            w.flush().map_err(|e| Error::io(&path, e))?;
            Ok(path)
        }
    }
}

/// Ground truth written next to a generated CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthManifest {
    pub spec: SynthSpec,
    pub relevant: Vec<usize>,
    pub lag: usize,
    pub weights: Vec<f64>,
    pub ar_coefficients: Vec<f64>,
    pub columns: Vec<String>,
    pub inputs: Vec<String>,
    pub target: String,
    /// Data source that reads the CSV back with the right schema.
    pub source: DataSource,
}

/// Default generator: eight AR(1) inputs, variables 0 and 1 planted at lag 1.
pub fn default_synth_spec() -> SynthSpec {
    SynthSpec::new(8, 10_000, vec![0, 1], 1, 0.1, 0)
}

/// Reads a generator spec, accepting either a bare spec or an experiment
/// config with a synthetic data source.
pub fn load_synth_spec(path: Option<&Path>, overrides: &[String]) -> Result<SynthSpec> {
    let mut value = match path {
        Some(p) => {
            let text = fs::read_to_string(p)
                .map_err(|e| Error::InvalidConfig(vec![format!("cannot read {}: {e}", p.display())]))?;
            let v: Value = serde_json::from_str(&text)
                .map_err(|e| Error::InvalidConfig(vec![format!("{} is not valid JSON: {e}", p.display())]))?;
            match v.pointer("/data/spec") {
                Some(spec) => spec.clone(),
                None => v,
            }
        }
        None => serde_json::to_value(default_synth_spec())?,
    };
    for o in overrides {
        super::config::apply_override(&mut value, o)?;
    }
    let spec: SynthSpec = serde_json::from_value(value).map_err(|e| Error::InvalidConfig(vec![e.to_string()]))?;
    spec.validate()?;
    Ok(spec)
}

/// Writes `synth.csv` and `synth_manifest.json` under `out`.
pub fn cmd_synth(spec: &SynthSpec, out: &Path) -> Result<(PathBuf, PathBuf)> {
    let series = synth_generate(spec)?;
    create_dir(out)?;
    let csv_path = out.join("synth.csv");
    let mut w = csv::Writer::from_path(&csv_path).map_err(|e| match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(&csv_path, io),
        other => Error::Precondition(format!("{other:?}")),
    })?;
    w.write_record(&series.columns)?;
    for row in &series.rows {
        w.write_record(row.iter().map(|v| v.to_string()))?;
    }
    w.flush().map_err(|e| Error::io(&csv_path, e))?;
    let manifest = SynthManifest {
        spec: spec.clone(),
        relevant: spec.relevant.clone(),
        lag: spec.lag,
        weights: spec.planted_weights(),
        ar_coefficients: (0..spec.n_vars).map(SynthSpec::ar_coefficient).collect(),
        columns: series.columns.clone(),
        inputs: series.inputs.clone(),
        target: series.target.clone(),
        source: DataSource::Csv {
            path: PathBuf::from("synth.csv"),
            schema: crate::data::Schema {
                inputs: Some(series.inputs.clone()),
                ..crate::data::Schema::new(series.target.clone())
            },
        },
    };
    let manifest_path = out.join("synth_manifest.json");
    write_json(&manifest_path, &manifest)?;
    Ok((csv_path, manifest_path))
}
