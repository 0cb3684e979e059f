//! Random missing-data masks and restoration quality metrics.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::partition::patch_count;
use crate::solver::Mask;

/// SplitMix64 generator.
///
/// The algorithm is fixed here rather than taken from a library so masks
/// are bit-identical across implementations.
#[derive(Clone, Debug)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> SplitMix64 {
        SplitMix64 { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    /// Uniform draw in `[0, 1)` from the top 53 bits.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MaskSpec {
    pub missing_ratio: f64,
    pub seed: u64,
}

impl MaskSpec {
    pub fn new(missing_ratio: f64, seed: u64) -> Result<MaskSpec> {
        if !(0.0..=1.0).contains(&missing_ratio) {
            return Err(Error::Domain(format!(
                "missing ratio {missing_ratio} not in [0, 1]"
            )));
        }
        Ok(MaskSpec {
            missing_ratio,
            seed,
        })
    }
}

/// One uniform draw per patch in canonical order; a patch is observed
/// iff its draw is strictly greater than the missing ratio.
pub fn gen_mask(level: u32, spec: &MaskSpec) -> Result<Mask> {
    let spec = MaskSpec::new(spec.missing_ratio, spec.seed)?;
    let mut rng = SplitMix64::new(spec.seed);
    let flags = (0..patch_count(level))
        .map(|_| rng.next_f64() > spec.missing_ratio)
        .collect();
    Mask::new(level, flags)
}

fn check_pair(x: &[f64], y: &[f64]) -> Result<()> {
    if x.len() != y.len() {
        return Err(Error::Shape(format!(
            "inputs have {} and {} entries",
            x.len(),
            y.len()
        )));
    }
    if x.is_empty() {
        return Err(Error::Domain("metrics need at least one entry".into()));
    }
    Ok(())
}

pub fn mse(x: &[f64], y: &[f64]) -> Result<f64> {
    check_pair(x, y)?;
    Ok(x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / x.len() as f64)
}

/// `20·log₁₀(255/√MSE)` over all entries; `+∞` for identical inputs.
pub fn psnr(x: &[f64], x_star: &[f64]) -> Result<f64> {
    let mse = mse(x, x_star)?;
    if mse == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(20.0 * (255.0 / mse.sqrt()).log10())
}

pub const SSIM_C1: f64 = (0.01 * 255.0) * (0.01 * 255.0);
pub const SSIM_C2: f64 = (0.03 * 255.0) * (0.03 * 255.0);

/// Global single-window SSIM from the means, variances and covariance of
/// the whole inputs (population moments).
pub fn ssim(x: &[f64], x_star: &[f64]) -> Result<f64> {
    check_pair(x, x_star)?;
    if x.len() < 2 {
        return Err(Error::Domain("SSIM needs at least two samples".into()));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = x_star.iter().sum::<f64>() / n;
    let (mut vx, mut vy, mut cov) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(x_star) {
        let (da, db) = (a - mx, b - my);
        vx += da * da;
        vy += db * db;
        cov += da * db;
    }
    let (vx, vy, cov) = (vx / n, vy / n, cov / n);
    Ok((2.0 * mx * my + SSIM_C1) * (2.0 * cov + SSIM_C2)
        / ((mx * mx + my * my + SSIM_C1) * (vx + vy + SSIM_C2)))
}

/// PSNR and SSIM of a restoration against ground truth.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Quality {
    #[serde(serialize_with = "serialize_db")]
    pub psnr_db: f64,
    pub ssim: f64,
}

pub fn quality(x: &[f64], x_star: &[f64]) -> Result<Quality> {
    Ok(Quality {
        psnr_db: psnr(x, x_star)?,
        ssim: ssim(x, x_star)?,
    })
}

/// Serializes non-finite values as the strings `"inf"`, `"-inf"`, `"nan"`.
pub fn serialize_db<S: serde::Serializer>(v: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    if v.is_finite() {
        s.serialize_f64(*v)
    } else if v.is_nan() {
        s.serialize_str("nan")
    } else if *v > 0.0 {
        s.serialize_str("inf")
    } else {
        s.serialize_str("-inf")
    }
}
