//! SPH1 binary container and PNG import/export.
//!
//! Every SPH1 file starts with a 12-byte header, all integers little-endian:
//!
//! | bytes | field                                   |
//! |-------|-----------------------------------------|
//! | 0..4  | magic `SPH1`                            |
//! | 4..6  | version / payload kind (u16)            |
//! | 6..10 | level `J` (u32)                         |
//! | 10    | channel count (u8)                      |
//! | 11    | face-order tag (u8, 0 = +z −z +x −x +y −y) |
//!
//! The payload depends on the version field:
//!
//! * `1` signal: channel-major `f64` values in canonical patch order.
//! * `2` pyramid: depth (u32), section count (u32), then per channel per
//!   section `level u32, band u8, offset u64, length u64` where offsets
//!   count `f64` values from the start of the data block, then the
//!   channel-major `f64` coefficients.
//! * `3` mask: one `u8` per patch, 1 = observed.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::framelet::{coefficient_count, FrameletPyramid};
use crate::partition::patch_count;
use crate::signal::{PlanarImage, SphericalSignal};
use crate::solver::Mask;

pub const MAGIC: &[u8; 4] = b"SPH1";
pub const VERSION_SIGNAL: u16 = 1;
pub const VERSION_PYRAMID: u16 = 2;
pub const VERSION_MASK: u16 = 3;
pub const FACE_ORDER_TAG: u8 = 0;

const HEADER_LEN: usize = 12;

/// Contents of an SPH1 file.
#[derive(Clone, Debug, PartialEq)]
pub enum Sph1 {
    Signal(SphericalSignal),
    Pyramid(FrameletPyramid),
    Mask(Mask),
}

fn header(version: u16, level: u32, channels: usize) -> Result<Vec<u8>> {
    let channels = u8::try_from(channels)
        .map_err(|_| Error::Shape(format!("{channels} channels exceed the SPH1 limit of 255")))?;
    let mut out = Vec::with_capacity(HEADER_LEN);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&version.to_le_bytes());
    out.extend_from_slice(&level.to_le_bytes());
    out.push(channels);
    out.push(FACE_ORDER_TAG);
    Ok(out)
}

pub fn encode_signal(sig: &SphericalSignal) -> Result<Vec<u8>> {
    let mut out = header(VERSION_SIGNAL, sig.level(), sig.channel_count())?;
    out.reserve(8 * sig.len() * sig.channel_count());
    for v in sig.iter() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    Ok(out)
}

pub fn encode_pyramid(pyr: &FrameletPyramid) -> Result<Vec<u8>> {
    let mut out = header(VERSION_PYRAMID, pyr.level(), pyr.channel_count())?;
    let sections = pyr.sections();
    let per_channel = coefficient_count(pyr.level(), pyr.depth());
    out.extend_from_slice(&pyr.depth().to_le_bytes());
    out.extend_from_slice(&((sections.len() * pyr.channel_count()) as u32).to_le_bytes());
    for c in 0..pyr.channel_count() {
        for s in &sections {
            out.extend_from_slice(&s.level.to_le_bytes());
            out.push(s.band);
            out.extend_from_slice(&((c * per_channel + s.offset) as u64).to_le_bytes());
            out.extend_from_slice(&(s.len as u64).to_le_bytes());
        }
    }
    for v in pyr.channels().iter().flatten() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    Ok(out)
}

pub fn encode_mask(mask: &Mask) -> Result<Vec<u8>> {
    let mut out = header(VERSION_MASK, mask.level(), 1)?;
    out.extend(mask.flags().iter().map(|&f| u8::from(f)));
    Ok(out)
}

fn format_err(reason: impl Into<String>) -> Error {
    Error::Format {
        what: "SPH1 file",
        reason: reason.into(),
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&end| end <= self.bytes.len())
            .ok_or_else(|| format_err(format!("truncated at byte {}", self.pos)))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(
            self.take(2)?.try_into().expect("2 bytes"),
        ))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(
            self.take(4)?.try_into().expect("4 bytes"),
        ))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(
            self.take(8)?.try_into().expect("8 bytes"),
        ))
    }

    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        let bytes = self.take(
            n.checked_mul(8)
                .ok_or_else(|| format_err("size overflow"))?,
        )?;
        Ok(bytes
            .chunks_exact(8)
            .map(|b| f64::from_le_bytes(b.try_into().expect("8 bytes")))
            .collect())
    }

    fn finish(&self) -> Result<()> {
        if self.pos != self.bytes.len() {
            return Err(format_err(format!(
                "{} trailing bytes",
                self.bytes.len() - self.pos
            )));
        }
        Ok(())
    }
}

/// Largest level accepted when decoding, to bound allocations.
const MAX_DECODE_LEVEL: u32 = 13;

pub fn decode(bytes: &[u8]) -> Result<Sph1> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(4)? != MAGIC {
        return Err(format_err("bad magic"));
    }
    let version = r.u16()?;
    let level = r.u32()?;
    let channels = r.u8()? as usize;
    let tag = r.u8()?;
    if tag != FACE_ORDER_TAG {
        return Err(format_err(format!("unknown face-order tag {tag}")));
    }
    if level > MAX_DECODE_LEVEL {
        return Err(format_err(format!("level {level} too large")));
    }
    if channels == 0 {
        return Err(format_err("zero channels"));
    }
    let n = patch_count(level);
    let out = match version {
        VERSION_SIGNAL => {
            let values = r.f64s(n * channels)?;
            let chans = values.chunks_exact(n).map(<[f64]>::to_vec).collect();
            Sph1::Signal(SphericalSignal::from_channels(level, chans)?)
        }
        VERSION_PYRAMID => {
            let depth = r.u32()?;
            if depth == 0 || depth > level {
                return Err(format_err(format!(
                    "depth {depth} invalid for level {level}"
                )));
            }
            let count = r.u32()? as usize;
            let per_channel = coefficient_count(level, depth);
            let probe = FrameletPyramid::zeros(level, depth, 1)?;
            let expected = probe.sections();
            if count != expected.len() * channels {
                return Err(format_err(format!(
                    "section count {count} does not match layout"
                )));
            }
            for c in 0..channels {
                for s in &expected {
                    let entry = (r.u32()?, r.u8()?, r.u64()?, r.u64()?);
                    let want = (
                        s.level,
                        s.band,
                        (c * per_channel + s.offset) as u64,
                        s.len as u64,
                    );
                    if entry != want {
                        return Err(format_err(format!(
                            "section entry {entry:?} expected {want:?}"
                        )));
                    }
                }
            }
            let values = r.f64s(per_channel * channels)?;
            let chans = values
                .chunks_exact(per_channel)
                .map(<[f64]>::to_vec)
                .collect();
            Sph1::Pyramid(FrameletPyramid::from_channels(level, depth, chans)?)
        }
        VERSION_MASK => {
            if channels != 1 {
                return Err(format_err("mask must have one channel"));
            }
            let flags = r
                .take(n)?
                .iter()
                .map(|&b| match b {
                    0 => Ok(false),
                    1 => Ok(true),
                    other => Err(format_err(format!("mask flag {other} not 0 or 1"))),
                })
                .collect::<Result<Vec<_>>>()?;
            Sph1::Mask(Mask::new(level, flags)?)
        }
        other => return Err(format_err(format!("unsupported version {other}"))),
    };
    r.finish()?;
    Ok(out)
}

/// Writes `bytes` to a temporary sibling of `path` and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    let name = path
        .file_name()
        .ok_or_else(|| Error::Domain(format!("{} has no file name", path.display())))?;
    let tmp = dir.join(format!(
        ".{}.tmp{}",
        name.to_string_lossy(),
        std::process::id()
    ));
    let write = || -> std::io::Result<()> {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    };
    write().map_err(|e| {
        let _ = fs::remove_file(&tmp);
        Error::io(path, e)
    })
}

pub fn read_sph1(path: &Path) -> Result<Sph1> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes)
}

pub fn read_signal(path: &Path) -> Result<SphericalSignal> {
    match read_sph1(path)? {
        Sph1::Signal(s) => Ok(s),
        _ => Err(format_err(format!(
            "{} does not hold a signal",
            path.display()
        ))),
    }
}

pub fn read_mask(path: &Path) -> Result<Mask> {
    match read_sph1(path)? {
        Sph1::Mask(m) => Ok(m),
        _ => Err(format_err(format!(
            "{} does not hold a mask",
            path.display()
        ))),
    }
}

pub fn write_signal(path: &Path, sig: &SphericalSignal) -> Result<()> {
    write_atomic(path, &encode_signal(sig)?)
}

pub fn write_pyramid(path: &Path, pyr: &FrameletPyramid) -> Result<()> {
    write_atomic(path, &encode_pyramid(pyr)?)
}

pub fn write_mask(path: &Path, mask: &Mask) -> Result<()> {
    write_atomic(path, &encode_mask(mask)?)
}

/// Reads an 8-bit PNG as a grayscale (1 channel) or RGB (3 channel) image.
/// Alpha is dropped.
pub fn read_png(path: &Path) -> Result<PlanarImage> {
    let img = image::open(path)?;
    let (channels, data): (usize, Vec<u8>) = if img.color().has_color() {
        (3, img.into_rgb8().into_raw())
    } else {
        (1, img.into_luma8().into_raw())
    };
    let (w, h) = image_dims(path)?;
    PlanarImage::new(w, h, channels, data.into_iter().map(f64::from).collect())
}

fn image_dims(path: &Path) -> Result<(usize, usize)> {
    let (w, h) = image::image_dimensions(path)?;
    Ok((w as usize, h as usize))
}

fn to_u8(v: f64) -> u8 {
    v.clamp(0.0, 255.0).round() as u8
}

/// Maps a value in `[0, 255]` to an RGB color on a blue–cyan–yellow–red ramp.
pub fn colormap(v: f64) -> [u8; 3] {
    const STOPS: [[f64; 3]; 5] = [
        [0.0, 0.0, 128.0],
        [0.0, 128.0, 255.0],
        [64.0, 224.0, 160.0],
        [255.0, 220.0, 0.0],
        [200.0, 0.0, 0.0],
    ];
    let t = v.clamp(0.0, 255.0) / 255.0 * (STOPS.len() - 1) as f64;
    let k = (t.floor() as usize).min(STOPS.len() - 2);
    let f = t - k as f64;
    std::array::from_fn(|i| to_u8((1.0 - f) * STOPS[k][i] + f * STOPS[k + 1][i]))
}

/// Encodes an image as an 8-bit PNG, clamping to `[0, 255]`. Single-channel
/// images are written through [`colormap`] when `color_map` is set.
pub fn encode_png(img: &PlanarImage, color_map: bool) -> Result<Vec<u8>> {
    let (w, h) = (img.width as u32, img.height as u32);
    let dynamic = match (img.channels, color_map) {
        (1, false) => image::DynamicImage::ImageLuma8(
            image::GrayImage::from_raw(w, h, img.data.iter().map(|&v| to_u8(v)).collect())
                .expect("buffer size matches"),
        ),
        (1, true) => image::DynamicImage::ImageRgb8(
            image::RgbImage::from_raw(w, h, img.data.iter().flat_map(|&v| colormap(v)).collect())
                .expect("buffer size matches"),
        ),
        (3, _) => image::DynamicImage::ImageRgb8(
            image::RgbImage::from_raw(w, h, img.data.iter().map(|&v| to_u8(v)).collect())
                .expect("buffer size matches"),
        ),
        (c, _) => return Err(Error::Shape(format!("cannot write {c}-channel PNG"))),
    };
    let mut out = Vec::new();
    dynamic.write_to(&mut std::io::Cursor::new(&mut out), image::ImageFormat::Png)?;
    Ok(out)
}

pub fn write_png(path: &Path, img: &PlanarImage, color_map: bool) -> Result<()> {
    write_atomic(path, &encode_png(img, color_map)?)
}
