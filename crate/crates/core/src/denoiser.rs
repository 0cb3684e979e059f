//! Denoisers for the plug-and-play `z` step.
//!
//! Anything implementing [`Denoiser`] can be handed to the solver. The
//! built-in kinds are the identity, framelet soft-shrinkage, and a bridge
//! that runs an external program on SPH1 files so a trained network can be
//! plugged in without linking it.

use std::path::{Path, PathBuf};
use std::process::Command;
use std::sync::atomic::{AtomicU64, Ordering};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::framelet::{analyze, default_depth, synthesize};
use crate::io::{decode, encode_signal, Sph1};
use crate::signal::SphericalSignal;
use crate::solver::soft_shrink;

/// Environment variable naming the scratch directory for external calls.
pub const SCRATCH_ENV: &str = "S2HAAR_SCRATCH";

pub const INPUT_PLACEHOLDER: &str = "{input}";
pub const SIGMA_PLACEHOLDER: &str = "{sigma}";
pub const OUTPUT_PLACEHOLDER: &str = "{output}";

/// Removes Gaussian-like noise of level `sigma` from a signal.
pub trait Denoiser: Sync {
    fn denoise(&self, sig: &SphericalSignal, sigma: f64) -> Result<SphericalSignal>;
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum DenoiserSpec {
    Identity,
    /// Soft-shrinks every detail coefficient by `gain·sigma`, leaving the
    /// lowpass untouched. `depth` defaults to `min(J, 3)` and is capped
    /// at `J`.
    FrameletShrink {
        depth: Option<u32>,
        gain: f64,
    },
    /// Runs `command` once per call. The template is split on whitespace
    /// and `{input}`, `{sigma}`, `{output}` are substituted in each word.
    External {
        command: String,
        scratch_dir: Option<PathBuf>,
    },
}

impl Default for DenoiserSpec {
    fn default() -> Self {
        DenoiserSpec::FrameletShrink {
            depth: None,
            gain: 1.0,
        }
    }
}

impl DenoiserSpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            DenoiserSpec::Identity => Ok(()),
            DenoiserSpec::FrameletShrink { depth, gain } => {
                if !(*gain > 0.0 && gain.is_finite()) {
                    return Err(Error::Domain(format!(
                        "shrink gain {gain} must be positive"
                    )));
                }
                if *depth == Some(0) {
                    return Err(Error::Domain("shrink depth must be at least 1".into()));
                }
                Ok(())
            }
            DenoiserSpec::External { command, .. } => {
                for p in [INPUT_PLACEHOLDER, SIGMA_PLACEHOLDER, OUTPUT_PLACEHOLDER] {
                    if !command.contains(p) {
                        return Err(Error::Domain(format!(
                            "external command template lacks {p}"
                        )));
                    }
                }
                if command.split_whitespace().next().is_none() {
                    return Err(Error::Domain("external command is empty".into()));
                }
                Ok(())
            }
        }
    }
}

impl Denoiser for DenoiserSpec {
    fn denoise(&self, sig: &SphericalSignal, sigma: f64) -> Result<SphericalSignal> {
        denoise(self, sig, sigma)
    }
}

/// Applies the denoiser described by `spec`. A zero `sigma` returns the
/// input unchanged for every kind.
pub fn denoise(spec: &DenoiserSpec, sig: &SphericalSignal, sigma: f64) -> Result<SphericalSignal> {
    spec.validate()?;
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(Error::Domain(format!(
            "noise level {sigma} must be finite and ≥ 0"
        )));
    }
    if sigma == 0.0 {
        return Ok(sig.clone());
    }
    match spec {
        DenoiserSpec::Identity => Ok(sig.clone()),
        DenoiserSpec::FrameletShrink { depth, gain } => {
            let depth = depth
                .unwrap_or_else(|| default_depth(sig.level()))
                .min(sig.level());
            if depth == 0 {
                return Ok(sig.clone());
            }
            let channels = sig
                .channels()
                .iter()
                .map(|c| shrink_details(c, sig.level(), depth, gain * sigma))
                .collect::<Result<Vec<_>>>()?;
            SphericalSignal::from_channels(sig.level(), channels)
        }
        DenoiserSpec::External {
            command,
            scratch_dir,
        } => {
            let dir = scratch_dir
                .clone()
                .or_else(|| std::env::var_os(SCRATCH_ENV).map(PathBuf::from))
                .unwrap_or_else(std::env::temp_dir);
            run_external(command, &dir, sig, sigma)
        }
    }
}

fn shrink_details(values: &[f64], level: u32, depth: u32, tau: f64) -> Result<Vec<f64>> {
    let mut coeffs = analyze(values, level, depth)?;
    let lowpass = crate::partition::patch_count(level - depth);
    for c in &mut coeffs[lowpass..] {
        *c = soft_shrink(*c, tau);
    }
    synthesize(&coeffs, level, depth)
}

static CALL_COUNTER: AtomicU64 = AtomicU64::new(0);

fn plugin_err(message: String, status: Option<i32>, stderr: String) -> Error {
    Error::Plugin {
        message,
        status,
        stderr,
    }
}

fn run_external(
    template: &str,
    scratch: &Path,
    sig: &SphericalSignal,
    sigma: f64,
) -> Result<SphericalSignal> {
    std::fs::create_dir_all(scratch).map_err(|e| Error::io(scratch, e))?;
    let call = CALL_COUNTER.fetch_add(1, Ordering::Relaxed);
    let stem = format!("s2haar-{}-{call}", std::process::id());
    let input = scratch.join(format!("{stem}-in.sph1"));
    let output = scratch.join(format!("{stem}-out.sph1"));
    std::fs::write(&input, encode_signal(sig)?).map_err(|e| Error::io(&input, e))?;

    let sigma_text = format!("{sigma}");
    let words: Vec<String> = template
        .split_whitespace()
        .map(|w| {
            w.replace(INPUT_PLACEHOLDER, &input.to_string_lossy())
                .replace(SIGMA_PLACEHOLDER, &sigma_text)
                .replace(OUTPUT_PLACEHOLDER, &output.to_string_lossy())
        })
        .collect();
    let result = Command::new(&words[0])
        .args(&words[1..])
        .output()
        .map_err(|e| {
            plugin_err(
                format!("failed to start `{}`: {e}", words[0]),
                None,
                String::new(),
            )
        })?;
    let stderr = String::from_utf8_lossy(&result.stderr).into_owned();
    if !result.status.success() {
        return Err(plugin_err(
            format!("`{}` exited with {}", words.join(" "), result.status),
            result.status.code(),
            stderr,
        ));
    }
    let bytes = std::fs::read(&output).map_err(|e| {
        plugin_err(
            format!("cannot read denoiser output {}: {e}", output.display()),
            result.status.code(),
            stderr.clone(),
        )
    })?;
    let out = match decode(&bytes) {
        Ok(Sph1::Signal(s)) => s,
        Ok(_) => {
            return Err(plugin_err(
                "denoiser output is not an SPH1 signal".into(),
                result.status.code(),
                stderr,
            ))
        }
        Err(e) => {
            return Err(plugin_err(
                format!("malformed denoiser output: {e}"),
                result.status.code(),
                stderr,
            ))
        }
    };
    if !out.same_shape(sig) {
        return Err(plugin_err(
            format!(
                "denoiser returned level {} with {} channels, expected level {} with {}",
                out.level(),
                out.channel_count(),
                sig.level(),
                sig.channel_count()
            ),
            result.status.code(),
            stderr,
        ));
    }
    let _ = std::fs::remove_file(&input);
    let _ = std::fs::remove_file(&output);
    Ok(out)
}
