//! Command-line front end: `simulate`, `decompose`, `snr`, `membership` and
//! `verify`.
//!
//! Exit codes: 0 success, 1 verification failure, 2 usage or config error.
//! Errors are reported on stderr as `{"error": {"kind": ..., "message": ...}}`.
//! The `CTK_LOG` environment variable sets the log level.

pub mod config;
pub mod pipeline;
pub mod verify;

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::projection::ProjectionResult;
use crate::signal::SampledSignal;
pub use config::ExperimentConfig;
pub use verify::{run_verify, VerifyOptions, VerifySummary};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VERIFY_FAILED: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

pub const LOG_ENV: &str = "CTK_LOG";

#[derive(Debug, Parser)]
#[command(name = "ctk", version, about = "Conjugate energy operators, derivative channels and matched-filter SNR")]
pub struct Cli {
    /// Experiment config (JSON).
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Output directory; JSON goes to stdout when omitted (except `simulate`).
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Overrides every seed in the config.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Test hook: corrupt the operator check in `verify`.
    #[arg(long, global = true)]
    pub perturb_psi: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate template and received signal, decompose, and report.
    Simulate,
    /// Project a received-signal CSV onto the configured basis.
    Decompose {
        #[arg(long, value_name = "CSV")]
        input: PathBuf,
    },
    /// Per-subchannel matched-filter SNR.
    Snr,
    /// Membership checks for each configured power of the family.
    Membership,
    /// Run the built-in invariant suite.
    Verify,
}

#[derive(Serialize)]
struct ErrorBody<'a> {
    kind: &'a str,
    message: String,
}

#[derive(Serialize)]
struct ErrorReport<'a> {
    error: ErrorBody<'a>,
}

fn error_json(kind: &str, message: String) -> String {
    serde_json::to_string(&ErrorReport { error: ErrorBody { kind, message } }).expect("plain strings serialize")
}

fn init_logging() {
    let env = env_logger::Env::new().filter_or(LOG_ENV, "warn");
    let _ = env_logger::Builder::from_env(env).target(env_logger::Target::Stderr).try_init();
}

/// Parses `args` (program name first) and runs the command; returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    init_logging();
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("{}", error_json(e.kind(), e.to_string()));
            EXIT_USAGE
        }
    }
}

fn load_config(cli: &Cli) -> Result<ExperimentConfig> {
    let path = cli.config.as_ref().ok_or_else(|| Error::Config("--config <PATH> is required".into()))?;
    let mut cfg = ExperimentConfig::load(path)?;
    if let Some(seed) = cli.seed {
        cfg.override_seed(seed);
    }
    Ok(cfg)
}

fn write_file(dir: &Path, name: &str, bytes: &[u8]) -> Result<()> {
    fs::create_dir_all(dir)?;
    let path = dir.join(name);
    fs::write(&path, bytes)?;
    log::info!("wrote {}", path.display());
    Ok(())
}

fn emit_json<T: Serialize>(out: Option<&Path>, name: &str, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    match out {
        Some(dir) => write_file(dir, name, text.as_bytes()),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn execute(cli: &Cli) -> Result<i32> {
    let out = cli.out.as_deref();
    match &cli.command {
        Command::Simulate => {
            let cfg = load_config(cli)?;
            let dir = out.map(Path::to_path_buf).or_else(|| cfg.output.dir.as_ref().map(PathBuf::from));
            let dir = dir.ok_or_else(|| Error::Config("simulate needs --out <DIR> or output.dir".into()))?;
            let sim = pipeline::simulate(&cfg)?;
            for (name, bytes) in pipeline::render(&sim)? {
                write_file(&dir, name, &bytes)?;
            }
            let mut timing = serde_json::to_vec_pretty(&sim.timing)?;
            timing.push(b'\n');
            write_file(&dir, "timing.json", &timing)?;
            Ok(EXIT_OK)
        }
        Command::Decompose { input } => {
            let cfg = load_config(cli)?;
            let r = SampledSignal::read_csv(fs::File::open(input)?)?;
            let d = pipeline::decompose(&cfg, &r)?;
            let result = d.projection.unwrap_or_else(|| ProjectionResult::empty(r.norm2()));
            emit_json(out, "projection.json", &result)?;
            Ok(EXIT_OK)
        }
        Command::Snr => {
            let cfg = load_config(cli)?;
            let report = pipeline::snr(&cfg)?
                .ok_or_else(|| Error::Config("snr needs an snr covariance block or noise.sigma2 > 0".into()))?;
            emit_json(out, "snr.json", &report)?;
            Ok(EXIT_OK)
        }
        Command::Membership => {
            let cfg = load_config(cli)?;
            emit_json(out, "membership.json", &pipeline::membership(&cfg)?)?;
            Ok(EXIT_OK)
        }
        Command::Verify => {
            let summary = run_verify(VerifyOptions { perturb_psi: cli.perturb_psi });
            print!("{}", summary.table());
            if let Some(dir) = out {
                emit_json(Some(dir), "verify.json", &summary)?;
            }
            if summary.passed {
                Ok(EXIT_OK)
            } else {
                eprintln!("failing invariants: {}", summary.failing().join(", "));
                Ok(EXIT_VERIFY_FAILED)
            }
        }
    }
}
