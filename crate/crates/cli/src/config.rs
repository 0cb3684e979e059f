//! Optional TOML run configuration. Command-line flags override the file,
//! which overrides the built-in defaults.

use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use s2haar::{DenoiserSpec, SolverParams};
use serde::Deserialize;

use crate::CliError;

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub level: Option<u32>,
    /// Transform depth.
    pub depth: Option<u32>,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default)]
    pub denoiser: DenoiserSection,
    #[serde(default)]
    pub mask: MaskSection,
    #[serde(default)]
    pub ingest: IngestSection,
    #[serde(default)]
    pub render: RenderSection,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSection {
    pub lambda: Option<f64>,
    pub beta1: Option<f64>,
    pub beta2: Option<f64>,
    pub depth: Option<u32>,
    pub max_iters: Option<usize>,
    pub rel_tol: Option<f64>,
    pub l1_weight: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DenoiserSection {
    pub kind: Option<DenoiserKind>,
    pub gain: Option<f64>,
    pub depth: Option<u32>,
    pub command: Option<String>,
    pub scratch_dir: Option<PathBuf>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaskSection {
    pub ratio: Option<f64>,
    pub seed: Option<u64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IngestSection {
    pub mode: Option<IngestMode>,
    pub face: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RenderSection {
    pub width: Option<usize>,
    pub height: Option<usize>,
    pub color_map: Option<ColorMap>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum DenoiserKind {
    Identity,
    FrameletShrink,
    External,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum IngestMode {
    Equirect,
    SingleFace,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum ColorMap {
    /// Color map for single-channel signals, plain RGB otherwise.
    Auto,
    Always,
    Never,
}

impl FileConfig {
    pub fn load(path: Option<&Path>) -> Result<FileConfig, CliError> {
        let Some(path) = path else {
            return Ok(FileConfig::default());
        };
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }
}

#[derive(Args, Debug, Default, Clone)]
pub struct SolverFlags {
    /// Regularization weight λ on the denoiser prior
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Penalty β₁ on y = F x
    #[arg(long)]
    pub beta1: Option<f64>,
    /// Penalty β₂ on z = x
    #[arg(long)]
    pub beta2: Option<f64>,
    /// Framelet depth used by the solver [default: min(J, 3)]
    #[arg(long = "solver-depth")]
    pub depth: Option<u32>,
    /// Iteration cap
    #[arg(long)]
    pub max_iters: Option<usize>,
    /// Stop once the relative change of x falls below this
    #[arg(long)]
    pub rel_tol: Option<f64>,
    /// Weight on ‖F x‖₁
    #[arg(long)]
    pub l1_weight: Option<f64>,
}

impl SolverFlags {
    pub fn resolve(&self, file: &SolverSection) -> Result<SolverParams, CliError> {
        let d = SolverParams::default();
        let params = SolverParams {
            lambda: self.lambda.or(file.lambda).unwrap_or(d.lambda),
            beta1: self.beta1.or(file.beta1).unwrap_or(d.beta1),
            beta2: self.beta2.or(file.beta2).unwrap_or(d.beta2),
            depth: self.depth.or(file.depth).or(d.depth),
            max_iters: self.max_iters.or(file.max_iters).unwrap_or(d.max_iters),
            rel_tol: self.rel_tol.or(file.rel_tol).unwrap_or(d.rel_tol),
            l1_weight: self.l1_weight.or(file.l1_weight).unwrap_or(d.l1_weight),
        };
        params.validate()?;
        Ok(params)
    }
}

#[derive(Args, Debug, Default, Clone)]
pub struct DenoiserFlags {
    /// Denoiser plugged into the z-update [default: framelet-shrink]
    #[arg(long, value_enum)]
    pub denoiser: Option<DenoiserKind>,
    /// Threshold gain c of framelet-shrink (threshold c·σ)
    #[arg(long)]
    pub gain: Option<f64>,
    /// Transform depth of framelet-shrink [default: min(J, 3)]
    #[arg(long)]
    pub denoiser_depth: Option<u32>,
    /// External denoiser command; {input}, {sigma}, {output} are substituted
    #[arg(long)]
    pub command: Option<String>,
    /// Scratch directory for external denoiser files [default: $S2HAAR_SCRATCH, then the system temp dir]
    #[arg(long)]
    pub scratch_dir: Option<PathBuf>,
}

impl DenoiserFlags {
    pub fn resolve(&self, file: &DenoiserSection) -> Result<DenoiserSpec, CliError> {
        let kind = self
            .denoiser
            .or(file.kind)
            .unwrap_or(DenoiserKind::FrameletShrink);
        let spec = match kind {
            DenoiserKind::Identity => DenoiserSpec::Identity,
            DenoiserKind::FrameletShrink => DenoiserSpec::FrameletShrink {
                depth: self.denoiser_depth.or(file.depth),
                gain: self.gain.or(file.gain).unwrap_or(1.0),
            },
            DenoiserKind::External => DenoiserSpec::External {
                command: self
                    .command
                    .clone()
                    .or_else(|| file.command.clone())
                    .ok_or_else(|| {
                        CliError::Usage("the external denoiser needs --command".into())
                    })?,
                scratch_dir: self
                    .scratch_dir
                    .clone()
                    .or_else(|| file.scratch_dir.clone()),
            },
        };
        spec.validate()?;
        Ok(spec)
    }
}
