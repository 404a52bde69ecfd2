//! The `stam` command line: `train`, `eval`, `explain`, `bench`, `synth`.
//!
//! Progress goes to standard error; results go to files under the output
//! directory (`--out`, else the config's `output_dir`, else `$STAM_OUT_DIR`,
//! else `./stam-out`).

mod commands;
mod config;

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

pub use commands::{
    cmd_bench, cmd_eval, cmd_explain, cmd_synth, cmd_train, default_synth_spec, load_data, load_synth_spec, write_bench,
    BenchRow, EvalReport, MetricStats, RunSummary, SynthManifest, TrainSummary,
};
pub use config::{apply_override, BenchSpec, ExperimentConfig, ModelSpec};

use crate::error::Error;
use crate::interpret::ReportFormat;

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "STAM_OUT_DIR";

pub mod exit {
    pub const SUCCESS: i32 = 0;
    /// I/O failures and anything not covered below.
    pub const OTHER: i32 = 1;
    /// Invalid configuration, overrides or command-line usage.
    pub const CONFIG: i32 = 2;
    /// Unreadable or unusable input data.
    pub const DATA: i32 = 3;
    /// Non-finite loss or predictions during training.
    pub const DIVERGED: i32 = 4;
    /// Weight files that are corrupt or do not fit the data.
    pub const MODEL: i32 = 5;
}

/// Process exit status for an error.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::InvalidConfig(_) | Error::UnsupportedArch { .. } => exit::CONFIG,
        Error::UnknownColumn(_)
        | Error::Parse { .. }
        | Error::Empty(_)
        | Error::MissingValue { .. }
        | Error::ConstantColumn(_)
        | Error::TooShort(_)
        | Error::UndefinedR2
        | Error::Csv(_) => exit::DATA,
        Error::DivergedTraining { .. } | Error::DivergedModel { .. } | Error::NonFiniteLoss => exit::DIVERGED,
        Error::VersionMismatch { .. } | Error::CorruptFile(_) | Error::ConfigMismatch(_) | Error::SchemaMismatch(_) => {
            exit::MODEL
        }
        Error::Shape { .. } | Error::Precondition(_) | Error::Contract(_) | Error::Io { .. } | Error::Json(_) => {
            exit::OTHER
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "stam", version, about = "Spatiotemporal attention forecasting")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// Override a config value, e.g. `--set train.epochs=2`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Output directory.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Train one model per seed and write weights, logs and a summary.
    Train {
        #[arg(long, value_name = "PATH")]
        config: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Score saved weights on a data split (RMSE, MAE, R² in original units).
    Eval {
        #[arg(long, value_name = "PATH")]
        weights: PathBuf,
        /// Dataset manifest written by `train`, or an experiment config.
        #[arg(long, value_name = "PATH")]
        data: PathBuf,
        #[arg(long, default_value = "test")]
        split: String,
        #[command(flatten)]
        common: Common,
    },
    /// Aggregate attention weights over a data split into reports.
    Explain {
        #[arg(long, value_name = "PATH")]
        weights: PathBuf,
        #[arg(long, value_name = "PATH")]
        data: PathBuf,
        #[arg(long, default_value = "test")]
        split: String,
        #[arg(long, default_value = "json")]
        format: ReportFormat,
        #[command(flatten)]
        common: Common,
    },
    /// Tabulate parameter counts, FLOP estimates and timings.
    Bench {
        #[arg(long, value_name = "PATH")]
        config: PathBuf,
        #[arg(long, default_value = "json")]
        format: ReportFormat,
        #[command(flatten)]
        common: Common,
    },
    /// Generate a planted-relevance CSV and its ground-truth manifest.
    Synth {
        /// Generator spec, or an experiment config with a synthetic source.
        #[arg(long, value_name = "PATH")]
        config: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
}

fn out_dir(flag: Option<PathBuf>, from_config: Option<&Path>) -> PathBuf {
    flag.or_else(|| from_config.map(Path::to_path_buf))
        .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("stam-out"))
}

fn execute(command: Command, err: &mut dyn Write) -> crate::Result<()> {
    match command {
        Command::Train { config, common } => {
            let cfg = ExperimentConfig::load(&config, &common.set)?;
            let out = out_dir(common.out, cfg.output_dir.as_deref());
            let summary = cmd_train(&cfg, &out, err)?;
            let _ = writeln!(
                err,
                "{} runs: test rmse {:.4} ± {:.4}, mae {:.4} ± {:.4}, r2 {:.4} ± {:.4}; wrote {}",
                summary.runs.len(),
                summary.test_rmse.mean,
                summary.test_rmse.std,
                summary.test_mae.mean,
                summary.test_mae.std,
                summary.test_r2.mean,
                summary.test_r2.std,
                out.join("summary.json").display()
            );
        }
        Command::Eval {
            weights,
            data,
            split,
            common,
        } => {
            let report = cmd_eval(&weights, &data, &split, &common.set)?;
            let out = out_dir(common.out, None);
            std::fs::create_dir_all(&out).map_err(|e| Error::io(&out, e))?;
            let path = out.join("eval.json");
            std::fs::write(&path, serde_json::to_string_pretty(&report)? + "\n").map_err(|e| Error::io(&path, e))?;
            let _ = writeln!(
                err,
                "{} on {} ({} windows): rmse {:.4}  mae {:.4}  r2 {:.4}  test time {:.3}s; wrote {}",
                report.arch,
                report.split,
                report.windows,
                report.rmse,
                report.mae,
                report.r2,
                report.test_seconds,
                path.display()
            );
        }
        Command::Explain {
            weights,
            data,
            split,
            format,
            common,
        } => {
            let out = out_dir(common.out, None);
            let (report, files) = cmd_explain(&weights, &data, &split, &common.set, &out, format)?;
            if let Some(s) = &report.spatial {
                for v in &s.variables {
                    let _ = writeln!(err, "{:>3}  {:<12} {:6.2}%", v.rank, v.name, v.percent);
                }
            }
            for f in files {
                let _ = writeln!(err, "wrote {}", f.display());
            }
        }
        Command::Bench { config, format, common } => {
            let cfg = ExperimentConfig::load(&config, &common.set)?;
            let out = out_dir(common.out, cfg.output_dir.as_deref());
            let rows = cmd_bench(&cfg, err)?;
            let path = write_bench(&rows, &out, format)?;
            let _ = writeln!(err, "wrote {}", path.display());
        }
        Command::Synth { config, common } => {
            let spec = load_synth_spec(config.as_deref(), &common.set)?;
            let out = out_dir(common.out, None);
            let (csv, manifest) = cmd_synth(&spec, &out)?;
            let _ = writeln!(err, "wrote {} and {}", csv.display(), manifest.display());
        }
    }
    Ok(())
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit status. Messages go to `err`.
pub fn run<I, T>(args: I, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { exit::CONFIG } else { exit::SUCCESS };
            let _ = write!(err, "{}", e.render());
            return code;
        }
    };
    match execute(cli.command, err) {
        Ok(()) => exit::SUCCESS,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            if let Error::InvalidConfig(problems) = &e {
                for p in problems {
                    let _ = writeln!(err, "  - {p}");
                }
            }
            exit_code(&e)
        }
    }
}
