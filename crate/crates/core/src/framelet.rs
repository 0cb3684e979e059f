//! Directional spherical Haar tight-framelet transform.
//!
//! One decomposition level takes each sibling group of four children
//! `v = (v₀, v₁, v₂, v₃)` (in child-digit order) to `P·v`, where the first
//! row of `P` gives the lowpass coefficient and the remaining six rows give
//! the detail bands. Since `PᵀP = I₄`, reconstruction by `Pᵀ` is an exact
//! left inverse and the transform preserves the ℓ₂ norm.
//!
//! A pyramid of depth `d` on a level-`J` signal is stored coarsest first:
//! the level-`(J−d)` lowpass, then for `ℓ = J−d, …, J−1` the six detail
//! bands of length `6·4^ℓ`.

use std::ops::Range;

use crate::error::{Error, Result};
use crate::partition::patch_count;
use crate::signal::SphericalSignal;

pub const BANDS: usize = 6;

/// The 7×4 analysis matrix.
pub const P: [[f64; 4]; 7] = [
    [0.5, 0.5, 0.5, 0.5],
    [0.5, -0.5, 0.0, 0.0],
    [0.5, 0.0, -0.5, 0.0],
    [0.5, 0.0, 0.0, -0.5],
    [0.0, 0.5, -0.5, 0.0],
    [0.0, 0.5, 0.0, -0.5],
    [0.0, 0.0, 0.5, -0.5],
];

/// Decomposition depth used when none is given: `min(J, 3)`.
pub fn default_depth(level: u32) -> u32 {
    level.min(3)
}

#[inline]
fn analyze_group([a, b, c, d]: [f64; 4]) -> [f64; 7] {
    [
        0.5 * (a + b + c + d),
        0.5 * (a - b),
        0.5 * (a - c),
        0.5 * (a - d),
        0.5 * (b - c),
        0.5 * (b - d),
        0.5 * (c - d),
    ]
}

#[inline]
fn synthesize_group([w0, w1, w2, w3, w4, w5, w6]: [f64; 7]) -> [f64; 4] {
    [
        0.5 * (w0 + w1 + w2 + w3),
        0.5 * (w0 - w1 + w4 + w5),
        0.5 * (w0 - w2 - w4 + w6),
        0.5 * (w0 - w3 - w5 - w6),
    ]
}

fn level_of_len(len: usize) -> Option<u32> {
    (0..=15).find(|&j| patch_count(j) == len)
}

fn analyze_into(fine: &[f64], low: &mut [f64], details: &mut [f64]) {
    let n = low.len();
    let (d1, rest) = details.split_at_mut(n);
    let (d2, rest) = rest.split_at_mut(n);
    let (d3, rest) = rest.split_at_mut(n);
    let (d4, rest) = rest.split_at_mut(n);
    let (d5, d6) = rest.split_at_mut(n);
    analyze_bands(fine, low, [d1, d2, d3, d4, d5, d6]);
}

fn analyze_bands(fine: &[f64], low: &mut [f64], [d1, d2, d3, d4, d5, d6]: [&mut [f64]; BANDS]) {
    for (p, group) in fine.chunks_exact(4).enumerate() {
        let w = analyze_group([group[0], group[1], group[2], group[3]]);
        low[p] = w[0];
        d1[p] = w[1];
        d2[p] = w[2];
        d3[p] = w[3];
        d4[p] = w[4];
        d5[p] = w[5];
        d6[p] = w[6];
    }
}

fn synthesize_into(low: &[f64], details: &[f64], fine: &mut [f64]) {
    let n = low.len();
    let bands: Vec<&[f64]> = details.chunks_exact(n).collect();
    synthesize_bands(low, &bands, fine);
}

fn synthesize_bands<B: AsRef<[f64]>>(low: &[f64], details: &[B], fine: &mut [f64]) {
    let band = |b: usize| details[b].as_ref();
    let (d1, d2, d3, d4, d5, d6) = (band(0), band(1), band(2), band(3), band(4), band(5));
    for (p, group) in fine.chunks_exact_mut(4).enumerate() {
        group.copy_from_slice(&synthesize_group([
            low[p], d1[p], d2[p], d3[p], d4[p], d5[p], d6[p],
        ]));
    }
}

/// One analysis level: a level-`j` vector to its level-`(j−1)` lowpass and
/// six detail bands.
pub fn decompose_level(fine: &[f64]) -> Result<(Vec<f64>, [Vec<f64>; BANDS])> {
    match level_of_len(fine.len()) {
        Some(j) if j >= 1 => {}
        _ => {
            return Err(Error::Shape(format!(
                "length {} is not 6·4^j with j ≥ 1",
                fine.len()
            )))
        }
    }
    let n = fine.len() / 4;
    let mut low = vec![0.0; n];
    let mut bands: [Vec<f64>; BANDS] = std::array::from_fn(|_| vec![0.0; n]);
    let [d1, d2, d3, d4, d5, d6] = &mut bands;
    analyze_bands(fine, &mut low, [d1, d2, d3, d4, d5, d6]);
    Ok((low, bands))
}

/// [`decompose_level`] into caller-provided buffers: `low` holds a quarter
/// of `fine`, `details` the six bands back to back.
pub fn decompose_level_into(fine: &[f64], low: &mut [f64], details: &mut [f64]) -> Result<()> {
    let n = fine.len() / 4;
    if !matches!(level_of_len(fine.len()), Some(j) if j >= 1)
        || low.len() != n
        || details.len() != BANDS * n
    {
        return Err(Error::Shape(format!(
            "buffers of {} and {} entries do not fit a level vector of {}",
            low.len(),
            details.len(),
            fine.len()
        )));
    }
    analyze_into(fine, low, details);
    Ok(())
}

/// One synthesis level, the exact left inverse of [`decompose_level`].
pub fn reconstruct_level<B: AsRef<[f64]>>(low: &[f64], details: &[B]) -> Result<Vec<f64>> {
    let n = low.len();
    if level_of_len(n).is_none() {
        return Err(Error::Shape(format!("lowpass length {n} is not 6·4^j")));
    }
    if details.len() != BANDS || details.iter().any(|d| d.as_ref().len() != n) {
        return Err(Error::Shape(format!(
            "expected {BANDS} detail bands of length {n}"
        )));
    }
    let mut fine = vec![0.0; 4 * n];
    synthesize_bands(low, details, &mut fine);
    Ok(fine)
}

/// [`reconstruct_level`] from a lowpass and six back-to-back bands into a
/// caller-provided buffer of four times the lowpass length.
pub fn reconstruct_level_into(low: &[f64], details: &[f64], fine: &mut [f64]) -> Result<()> {
    let n = low.len();
    if level_of_len(n).is_none() || details.len() != BANDS * n || fine.len() != 4 * n {
        return Err(Error::Shape(format!(
            "buffers of {}, {} and {} entries do not fit one synthesis level",
            n,
            details.len(),
            fine.len()
        )));
    }
    synthesize_into(low, details, fine);
    Ok(())
}

/// Total coefficient count of a depth-`d` pyramid on a level-`J` signal.
pub fn coefficient_count(level: u32, depth: u32) -> usize {
    patch_count(level - depth)
        + (level - depth..level)
            .map(|l| BANDS * patch_count(l))
            .sum::<usize>()
}

fn check_depth(level: u32, depth: u32) -> Result<()> {
    if depth == 0 || depth > level {
        return Err(Error::Domain(format!("depth {depth} not in [1, {level}]")));
    }
    Ok(())
}

/// Offset of the detail block of level `l` in the flat layout.
fn detail_offset(level: u32, depth: u32, l: u32) -> usize {
    patch_count(level - depth)
        + (level - depth..l)
            .map(|k| BANDS * patch_count(k))
            .sum::<usize>()
}

/// Flat analysis of a single-channel level-`J` vector.
pub fn analyze(values: &[f64], level: u32, depth: u32) -> Result<Vec<f64>> {
    check_depth(level, depth)?;
    if values.len() != patch_count(level) {
        return Err(Error::Shape(format!(
            "signal has {} values, level {level} needs {}",
            values.len(),
            patch_count(level)
        )));
    }
    let mut out = vec![0.0; coefficient_count(level, depth)];
    let mut current = values.to_vec();
    for l in (level - depth..level).rev() {
        let n = patch_count(l);
        let offset = detail_offset(level, depth, l);
        let mut low = vec![0.0; n];
        analyze_into(&current, &mut low, &mut out[offset..offset + BANDS * n]);
        current = low;
    }
    out[..current.len()].copy_from_slice(&current);
    Ok(out)
}

/// Flat synthesis, the adjoint of [`analyze`].
pub fn synthesize(coeffs: &[f64], level: u32, depth: u32) -> Result<Vec<f64>> {
    check_depth(level, depth)?;
    if coeffs.len() != coefficient_count(level, depth) {
        return Err(Error::Shape(format!(
            "pyramid has {} coefficients, level {level} depth {depth} needs {}",
            coeffs.len(),
            coefficient_count(level, depth)
        )));
    }
    let mut current = coeffs[..patch_count(level - depth)].to_vec();
    for l in level - depth..level {
        let n = patch_count(l);
        let offset = detail_offset(level, depth, l);
        let mut fine = vec![0.0; 4 * n];
        synthesize_into(&current, &coeffs[offset..offset + BANDS * n], &mut fine);
        current = fine;
    }
    Ok(current)
}

/// One entry of a pyramid's section table. Band 0 is the lowpass.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Section {
    pub level: u32,
    pub band: u8,
    pub offset: usize,
    pub len: usize,
}

/// Framelet coefficients of every channel of a signal.
#[derive(Clone, Debug, PartialEq)]
pub struct FrameletPyramid {
    level: u32,
    depth: u32,
    channels: Vec<Vec<f64>>,
}

impl FrameletPyramid {
    pub fn from_channels(
        level: u32,
        depth: u32,
        channels: Vec<Vec<f64>>,
    ) -> Result<FrameletPyramid> {
        check_depth(level, depth).map_err(|e| Error::Shape(e.to_string()))?;
        let n = coefficient_count(level, depth);
        if channels.is_empty() || channels.iter().any(|c| c.len() != n) {
            return Err(Error::Shape(format!(
                "every channel needs {n} coefficients for level {level} depth {depth}"
            )));
        }
        Ok(FrameletPyramid {
            level,
            depth,
            channels,
        })
    }

    pub fn zeros(level: u32, depth: u32, channels: usize) -> Result<FrameletPyramid> {
        check_depth(level, depth)?;
        Ok(FrameletPyramid {
            level,
            depth,
            channels: vec![vec![0.0; coefficient_count(level, depth)]; channels.max(1)],
        })
    }

    pub fn level(&self) -> u32 {
        self.level
    }

    pub fn depth(&self) -> u32 {
        self.depth
    }

    pub fn channel_count(&self) -> usize {
        self.channels.len()
    }

    pub fn channel(&self, c: usize) -> &[f64] {
        &self.channels[c]
    }

    pub fn channel_mut(&mut self, c: usize) -> &mut [f64] {
        &mut self.channels[c]
    }

    pub fn channels(&self) -> &[Vec<f64>] {
        &self.channels
    }

    pub fn lowpass_range(&self) -> Range<usize> {
        0..patch_count(self.level - self.depth)
    }

    /// Range of detail band `band ∈ 1..=6` at level `l ∈ [J−d, J)`.
    pub fn band_range(&self, l: u32, band: usize) -> Result<Range<usize>> {
        if !(self.level - self.depth..self.level).contains(&l) || !(1..=BANDS).contains(&band) {
            return Err(Error::Lookup(format!("no band {band} at level {l}")));
        }
        let n = patch_count(l);
        let start = detail_offset(self.level, self.depth, l) + (band - 1) * n;
        Ok(start..start + n)
    }

    pub fn lowpass(&self, c: usize) -> &[f64] {
        &self.channels[c][self.lowpass_range()]
    }

    pub fn band(&self, c: usize, l: u32, band: usize) -> Result<&[f64]> {
        Ok(&self.channels[c][self.band_range(l, band)?])
    }

    /// Section table of one channel, coarsest first.
    pub fn sections(&self) -> Vec<Section> {
        let low = self.lowpass_range();
        let mut out = vec![Section {
            level: self.level - self.depth,
            band: 0,
            offset: 0,
            len: low.len(),
        }];
        for l in self.level - self.depth..self.level {
            for b in 1..=BANDS {
                let r = self.band_range(l, b).expect("band in range");
                out.push(Section {
                    level: l,
                    band: b as u8,
                    offset: r.start,
                    len: r.len(),
                });
            }
        }
        out
    }

    pub fn norm(&self) -> f64 {
        self.channels
            .iter()
            .flatten()
            .map(|v| v * v)
            .sum::<f64>()
            .sqrt()
    }
}

/// Analysis operator `F` applied to every channel.
pub fn decompose(sig: &SphericalSignal, depth: u32) -> Result<FrameletPyramid> {
    check_depth(sig.level(), depth)?;
    let channels = sig
        .channels()
        .iter()
        .map(|c| analyze(c, sig.level(), depth))
        .collect::<Result<Vec<_>>>()?;
    Ok(FrameletPyramid {
        level: sig.level(),
        depth,
        channels,
    })
}

/// Synthesis operator `F*` applied to every channel.
pub fn reconstruct(pyr: &FrameletPyramid) -> Result<SphericalSignal> {
    let channels = pyr
        .channels
        .iter()
        .map(|c| synthesize(c, pyr.level, pyr.depth))
        .collect::<Result<Vec<_>>>()?;
    SphericalSignal::from_channels(pyr.level, channels)
}
