//! `s2haar` command-line tool.
//!
//! Every subcommand prints a JSON report on standard output (and writes it
//! to `--report` when given). Failures print a JSON error object on
//! standard error and exit nonzero.

mod commands;
mod config;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use config::{ColorMap, DenoiserFlags, FileConfig, IngestMode, SolverFlags};

/// Report layout version.
pub const SCHEMA_VERSION: u32 = 1;

/// Spherical Haar tight-framelet transform and plug-and-play ADMM
/// inpainting on an equal-area sphere partition.
#[derive(Parser, Debug)]
#[command(name = "s2haar", version, about)]
struct Cli {
    /// TOML configuration file; command-line flags take precedence over it
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Also write the JSON report to this file
    #[arg(long, global = true)]
    report: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Partition summary: patch count, leaf-area statistics, optionally every split
    PartitionInfo {
        #[arg(long)]
        level: Option<u32>,
        /// Include the split position of every node
        #[arg(long)]
        splits: bool,
    },
    /// Sample a PNG onto the sphere and write an SPH1 signal
    Ingest {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
        #[arg(long)]
        level: Option<u32>,
        /// Equirectangular panorama or a square grayscale image on one face [default: equirect]
        #[arg(long, value_enum)]
        mode: Option<IngestMode>,
        /// Face index for single-face mode, in the order +z −z +x −x +y −y [default: 0]
        #[arg(long)]
        face: Option<usize>,
    },
    /// Render an SPH1 signal as an equirectangular PNG
    Render {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
        #[command(flatten)]
        view: ViewFlags,
    },
    /// Framelet decomposition (signal → pyramid) or, with --inverse, reconstruction
    Transform {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
        /// Decomposition depth [default: min(J, 3)]
        #[arg(long)]
        depth: Option<u32>,
        #[arg(long)]
        inverse: bool,
    },
    /// Apply a denoiser at noise level sigma
    Denoise {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
        #[arg(long)]
        sigma: f64,
        #[command(flatten)]
        denoiser: DenoiserFlags,
    },
    /// Generate a seeded random missing-data mask
    Mask {
        #[arg(long)]
        level: Option<u32>,
        /// Fraction of patches to drop, in [0, 1]
        #[arg(long)]
        ratio: Option<f64>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        output: PathBuf,
    },
    /// Restore missing patches with plug-and-play ADMM
    Inpaint(Box<InpaintArgs>),
    /// PSNR and SSIM between two SPH1 signals or two PNG images
    Metrics {
        #[arg(long)]
        truth: PathBuf,
        #[arg(long)]
        test: PathBuf,
    },
    /// Time single-level decomposition and reconstruction across levels
    Bench {
        /// Inclusive level range, e.g. 6..9
        #[arg(long, default_value = "6..9")]
        levels: String,
        /// Timed repetitions per level; the minimum is reported
        #[arg(long, default_value_t = 7)]
        reps: usize,
        /// Skip cache eviction between repetitions
        #[arg(long)]
        warm: bool,
    },
}

#[derive(Args, Debug)]
struct InpaintArgs {
    /// Observed signal (values at missing patches are ignored)
    #[arg(long)]
    input: PathBuf,
    /// Restored SPH1 signal
    #[arg(long)]
    output: PathBuf,
    /// Mask file; otherwise one is drawn from --ratio and --seed
    #[arg(long, conflicts_with = "ratio")]
    mask: Option<PathBuf>,
    /// Missing ratio of a generated mask; the input then serves as ground truth
    #[arg(long)]
    ratio: Option<f64>,
    /// Seed of a generated mask [default: 0]
    #[arg(long)]
    seed: Option<u64>,
    /// Ground truth for the quality metrics
    #[arg(long)]
    truth: Option<PathBuf>,
    /// Sweep the β₁ × β₂ grid and keep the best PSNR (needs ground truth)
    #[arg(long)]
    grid: bool,
    /// Rendered PNG [default: output with a .png extension]
    #[arg(long)]
    png: Option<PathBuf>,
    #[command(flatten)]
    view: ViewFlags,
    #[command(flatten)]
    solver: SolverFlags,
    #[command(flatten)]
    denoiser: DenoiserFlags,
}

#[derive(Args, Debug, Clone)]
struct ViewFlags {
    /// Image width [default: 16·2^J, at most 4096]
    #[arg(long)]
    width: Option<usize>,
    /// Image height [default: width / 2]
    #[arg(long)]
    height: Option<usize>,
    #[arg(long, value_enum)]
    color_map: Option<ColorMap>,
}

#[derive(Debug)]
pub enum CliError {
    Core(s2haar::Error),
    Config(String),
    Usage(String),
    /// A self-check recorded in the report failed.
    Check(String),
}

impl From<s2haar::Error> for CliError {
    fn from(e: s2haar::Error) -> Self {
        CliError::Core(e)
    }
}

impl CliError {
    fn to_json(&self) -> Value {
        let (kind, message) = match self {
            CliError::Core(e) => (e.kind(), e.to_string()),
            CliError::Config(m) => ("config", m.clone()),
            CliError::Usage(m) => ("usage", m.clone()),
            CliError::Check(m) => ("check", m.clone()),
        };
        let mut err = json!({ "kind": kind, "message": message });
        if let CliError::Core(s2haar::Error::Plugin { status, stderr, .. }) = self {
            err["status"] = json!(status);
            err["stderr"] = json!(stderr);
        }
        json!({ "error": err })
    }

    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) | CliError::Config(_) => 2,
            _ => 1,
        }
    }
}

/// What a subcommand produced, before the report envelope is added.
pub struct Outcome {
    pub settings: Value,
    pub inputs: Vec<PathBuf>,
    pub outputs: Vec<PathBuf>,
    pub body: Value,
    /// Where the report goes when `--report` is absent.
    pub default_report: Option<PathBuf>,
}

fn file_digest(path: &PathBuf) -> Result<Value, CliError> {
    let bytes = std::fs::read(path).map_err(|e| {
        CliError::Core(s2haar::Error::Io {
            path: path.clone(),
            source: e,
        })
    })?;
    let hash: String = Sha256::digest(&bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect();
    Ok(json!({ "path": path, "sha256": hash, "bytes": bytes.len() }))
}

fn run(cli: Cli) -> Result<(), CliError> {
    let file = FileConfig::load(cli.config.as_deref())?;
    let name = match &cli.command {
        Command::PartitionInfo { .. } => "partition-info",
        Command::Ingest { .. } => "ingest",
        Command::Render { .. } => "render",
        Command::Transform { .. } => "transform",
        Command::Denoise { .. } => "denoise",
        Command::Mask { .. } => "mask",
        Command::Inpaint(_) => "inpaint",
        Command::Metrics { .. } => "metrics",
        Command::Bench { .. } => "bench",
    };
    let outcome = commands::dispatch(cli.command, &file)?;
    let config_digest = cli.config.as_ref().map(file_digest).transpose()?;
    let mut report = json!({
        "schema_version": SCHEMA_VERSION,
        "tool": env!("CARGO_PKG_NAME"),
        "version": env!("CARGO_PKG_VERSION"),
        "library_version": s2haar::VERSION,
        "command": name,
        "config_file": config_digest,
        "settings": outcome.settings,
        "inputs": outcome.inputs.iter().map(file_digest).collect::<Result<Vec<_>, _>>()?,
        "outputs": outcome.outputs.iter().map(file_digest).collect::<Result<Vec<_>, _>>()?,
    });
    if let (Value::Object(dst), Value::Object(src)) = (&mut report, outcome.body) {
        dst.extend(src);
    }
    let text = serde_json::to_string_pretty(&report).expect("report serializes");
    if let Some(path) = cli.report.or(outcome.default_report) {
        s2haar::io::write_atomic(&path, format!("{text}\n").as_bytes())?;
    }
    // A closed pipe (e.g. `| head`) is not an error worth reporting.
    let _ = writeln!(std::io::stdout().lock(), "{text}");
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let text = e.render().to_string();
            let err = CliError::Usage(text.trim().trim_start_matches("error: ").to_string());
            eprintln!("{}", err.to_json());
            return ExitCode::from(err.exit_code());
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("{}", err.to_json());
            ExitCode::from(err.exit_code())
        }
    }
}
