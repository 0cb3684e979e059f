//! Spherical signals and conversion to and from planar images.
//!
//! Equirectangular images map longitude `λ ∈ [−π, π)` linearly to columns
//! and latitude `φ ∈ [−π/2, π/2]` to rows, with row 0 at the north pole.
//! Pixel `(r, c)` sits at the center of its cell.

use std::f64::consts::{FRAC_PI_2, PI};

use crate::error::{Error, Result};
use crate::partition::{patch_count, Face, Partition, Vec3};

/// Per-channel sample values on every leaf patch of a level-`J` partition,
/// stored channel-major in canonical patch order.
#[derive(Clone, Debug, PartialEq)]
pub struct SphericalSignal {
    level: u32,
    channels: Vec<Vec<f64>>,
}

impl SphericalSignal {
    pub fn from_channels(level: u32, channels: Vec<Vec<f64>>) -> Result<SphericalSignal> {
        if channels.is_empty() {
            return Err(Error::Shape("signal needs at least one channel".into()));
        }
        let n = patch_count(level);
        for (c, values) in channels.iter().enumerate() {
            if values.len() != n {
                return Err(Error::Shape(format!(
                    "channel {c} has {} values, level {level} needs {n}",
                    values.len()
                )));
            }
            if let Some(i) = values.iter().position(|v| !v.is_finite()) {
                return Err(Error::Domain(format!(
                    "channel {c} value {i} is not finite"
                )));
            }
        }
        Ok(SphericalSignal { level, channels })
    }

    pub fn from_values(level: u32, values: Vec<f64>) -> Result<SphericalSignal> {
        Self::from_channels(level, vec![values])
    }

    pub fn constant(level: u32, channels: usize, value: f64) -> SphericalSignal {
        SphericalSignal {
            level,
            channels: vec![vec![value; patch_count(level)]; channels.max(1)],
        }
    }

    pub fn zeros(level: u32, channels: usize) -> SphericalSignal {
        Self::constant(level, channels, 0.0)
    }

    pub fn level(&self) -> u32 {
        self.level
    }

    pub fn channel_count(&self) -> usize {
        self.channels.len()
    }

    /// Samples per channel, `6·4^J`.
    pub fn len(&self) -> usize {
        patch_count(self.level)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn channel(&self, c: usize) -> &[f64] {
        &self.channels[c]
    }

    pub fn channels(&self) -> &[Vec<f64>] {
        &self.channels
    }

    pub fn into_channels(self) -> Vec<Vec<f64>> {
        self.channels
    }

    /// Splits into single-channel signals.
    pub fn split_channels(&self) -> Vec<SphericalSignal> {
        self.channels
            .iter()
            .map(|values| SphericalSignal {
                level: self.level,
                channels: vec![values.clone()],
            })
            .collect()
    }

    /// Inverse of [`SphericalSignal::split_channels`].
    pub fn merge_channels(parts: Vec<SphericalSignal>) -> Result<SphericalSignal> {
        let level = parts
            .first()
            .map(|p| p.level)
            .ok_or_else(|| Error::Shape("no channels to merge".into()))?;
        if parts.iter().any(|p| p.level != level) {
            return Err(Error::Shape("channels have differing levels".into()));
        }
        let channels = parts.into_iter().flat_map(|p| p.channels).collect();
        Ok(SphericalSignal { level, channels })
    }

    pub fn same_shape(&self, other: &SphericalSignal) -> bool {
        self.level == other.level && self.channel_count() == other.channel_count()
    }

    /// All samples, channel-major.
    pub fn iter(&self) -> impl Iterator<Item = f64> + '_ {
        self.channels.iter().flatten().copied()
    }

    pub fn min_max(&self) -> (f64, f64) {
        self.iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
                (lo.min(v), hi.max(v))
            })
    }
}

/// Planar image with `f64` samples, row-major with interleaved channels.
#[derive(Clone, Debug, PartialEq)]
pub struct PlanarImage {
    pub width: usize,
    pub height: usize,
    pub channels: usize,
    pub data: Vec<f64>,
}

/// Equirectangular panorama.
pub type EquirectImage = PlanarImage;

impl PlanarImage {
    pub fn new(
        width: usize,
        height: usize,
        channels: usize,
        data: Vec<f64>,
    ) -> Result<PlanarImage> {
        if width == 0 || height == 0 || channels == 0 {
            return Err(Error::Shape(format!(
                "image dimensions {width}x{height}x{channels} must be positive"
            )));
        }
        if data.len() != width * height * channels {
            return Err(Error::Shape(format!(
                "image data has {} values, expected {}",
                data.len(),
                width * height * channels
            )));
        }
        Ok(PlanarImage {
            width,
            height,
            channels,
            data,
        })
    }

    pub fn filled(width: usize, height: usize, channels: usize, value: f64) -> PlanarImage {
        PlanarImage {
            width,
            height,
            channels,
            data: vec![value; width * height * channels],
        }
    }

    pub fn get(&self, row: usize, col: usize, channel: usize) -> f64 {
        self.data[(row * self.width + col) * self.channels + channel]
    }

    /// Bilinear sample at continuous pixel coordinates, where integer
    /// coordinates are pixel centers. Rows are clamped; columns wrap when
    /// `wrap_cols` is set and are clamped otherwise.
    pub fn bilinear(&self, x: f64, y: f64, channel: usize, wrap_cols: bool) -> f64 {
        let (w, h) = (self.width as isize, self.height as isize);
        let y = y.clamp(0.0, (h - 1) as f64);
        let x = if wrap_cols {
            x
        } else {
            x.clamp(0.0, (w - 1) as f64)
        };
        let (x0, y0) = (x.floor(), y.floor());
        let (fx, fy) = (x - x0, y - y0);
        let col = |c: isize| -> usize {
            if wrap_cols {
                c.rem_euclid(w) as usize
            } else {
                c.clamp(0, w - 1) as usize
            }
        };
        let row = |r: isize| r.clamp(0, h - 1) as usize;
        let (c0, c1) = (col(x0 as isize), col(x0 as isize + 1));
        let (r0, r1) = (row(y0 as isize), row(y0 as isize + 1));
        let top = (1.0 - fx) * self.get(r0, c0, channel) + fx * self.get(r0, c1, channel);
        let bottom = (1.0 - fx) * self.get(r1, c0, channel) + fx * self.get(r1, c1, channel);
        (1.0 - fy) * top + fy * bottom
    }

    pub fn mean(&self, channel: usize) -> f64 {
        let sum: f64 = self.data.iter().skip(channel).step_by(self.channels).sum();
        sum / (self.width * self.height) as f64
    }
}

/// Longitude and latitude of a unit vector.
pub fn lon_lat(p: Vec3) -> (f64, f64) {
    (p[1].atan2(p[0]), p[2].clamp(-1.0, 1.0).asin())
}

/// Unit vector at longitude `lon` and latitude `lat`.
pub fn direction(lon: f64, lat: f64) -> Vec3 {
    let (sl, cl) = lat.sin_cos();
    let (so, co) = lon.sin_cos();
    [cl * co, cl * so, sl]
}

/// Continuous pixel coordinates `(x, y)` of a direction in a `W×H`
/// equirectangular image.
fn equirect_coords(p: Vec3, width: usize, height: usize) -> (f64, f64) {
    let (lon, lat) = lon_lat(p);
    let x = (lon + PI) / (2.0 * PI) * width as f64 - 0.5;
    let y = (FRAC_PI_2 - lat) / PI * height as f64 - 0.5;
    (x, y)
}

/// Direction of the center of pixel `(row, col)`.
pub fn pixel_direction(row: usize, col: usize, width: usize, height: usize) -> Vec3 {
    let lon = -PI + (col as f64 + 0.5) * 2.0 * PI / width as f64;
    let lat = FRAC_PI_2 - (row as f64 + 0.5) * PI / height as f64;
    direction(lon, lat)
}

/// Samples an equirectangular image at every patch center by bilinear
/// interpolation, wrapping in longitude.
pub fn from_equirectangular(img: &EquirectImage, partition: &Partition) -> SphericalSignal {
    let coords: Vec<(f64, f64)> = partition
        .centers()
        .iter()
        .map(|&c| equirect_coords(c, img.width, img.height))
        .collect();
    let channels = (0..img.channels)
        .map(|ch| {
            coords
                .iter()
                .map(|&(x, y)| img.bilinear(x, y, ch, true))
                .collect()
        })
        .collect();
    SphericalSignal {
        level: partition.level(),
        channels,
    }
}

/// Renders a signal to a `W×H` equirectangular image, each pixel taking the
/// value of the patch containing its direction. Values are not clamped.
pub fn to_equirectangular(
    sig: &SphericalSignal,
    partition: &Partition,
    width: usize,
    height: usize,
) -> Result<EquirectImage> {
    if partition.level() != sig.level() {
        return Err(Error::Shape(format!(
            "signal level {} does not match partition level {}",
            sig.level(),
            partition.level()
        )));
    }
    if width == 0 || height == 0 {
        return Err(Error::Shape("output image must be at least 1x1".into()));
    }
    let nc = sig.channel_count();
    let mut data = Vec::with_capacity(width * height * nc);
    for row in 0..height {
        for col in 0..width {
            let index = partition.locate_index(pixel_direction(row, col, width, height))?;
            data.extend(sig.channels.iter().map(|values| values[index]));
        }
    }
    PlanarImage::new(width, height, nc, data)
}

/// Leaf indices that receive at least one pixel of a `W×H` rendering.
pub fn rendered_patches(partition: &Partition, width: usize, height: usize) -> Result<Vec<bool>> {
    let mut hit = vec![false; partition.leaf_count()];
    for row in 0..height {
        for col in 0..width {
            hit[partition.locate_index(pixel_direction(row, col, width, height))?] = true;
        }
    }
    Ok(hit)
}

/// Maps a square grayscale image onto one face's parameter square.
///
/// Columns run along `u` and rows along `v`, with row 0 at `v = 1`; pixel
/// centers sit at `u = −1 + (c + ½)·2/N`. Patches of the target face take a
/// bilinear sample at their parameter midpoint; every other face is filled
/// with the image mean.
pub fn single_face_ingest(
    img: &PlanarImage,
    face: usize,
    partition: &Partition,
) -> Result<SphericalSignal> {
    let face = Face::from_index(face)?;
    if img.width != img.height {
        return Err(Error::Domain(format!(
            "single-face ingestion needs a square image, got {}x{}",
            img.width, img.height
        )));
    }
    if img.channels != 1 {
        return Err(Error::Domain(format!(
            "single-face ingestion needs a grayscale image, got {} channels",
            img.channels
        )));
    }
    let n = img.width as f64;
    let mean = img.mean(0);
    let values = partition
        .leaf_rects()
        .iter()
        .map(|rect| {
            if rect.face as usize != face.index() {
                return mean;
            }
            let (u, v) = rect.midpoint();
            let x = (u + 1.0) * 0.5 * n - 0.5;
            let y = (1.0 - v) * 0.5 * n - 0.5;
            img.bilinear(x, y, 0, false)
        })
        .collect();
    Ok(SphericalSignal {
        level: partition.level(),
        channels: vec![values],
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::partition::build_partition;

    #[test]
    fn rejects_bad_shapes() {
        assert!(matches!(
            SphericalSignal::from_values(1, vec![0.0; 23]),
            Err(Error::Shape(_))
        ));
        assert!(matches!(
            SphericalSignal::from_values(0, vec![0.0, 1.0, f64::NAN, 0.0, 0.0, 0.0]),
            Err(Error::Domain(_))
        ));
        assert!(SphericalSignal::from_channels(0, vec![]).is_err());
        assert!(PlanarImage::new(2, 2, 1, vec![0.0; 3]).is_err());
    }

    #[test]
    fn split_and_merge_channels() {
        let s = SphericalSignal::from_channels(0, vec![vec![1.0; 6], vec![2.0; 6], vec![3.0; 6]])
            .unwrap();
        let parts = s.split_channels();
        assert_eq!(parts.len(), 3);
        assert_eq!(parts[1].channel(0), &[2.0; 6]);
        assert_eq!(SphericalSignal::merge_channels(parts).unwrap(), s);
    }

    #[test]
    fn constant_image_gives_constant_signal() {
        let p = build_partition(3).unwrap();
        let img = PlanarImage::filled(37, 19, 3, 42.5);
        let s = from_equirectangular(&img, &p);
        assert_eq!(s.channel_count(), 3);
        assert!(s.iter().all(|v| (v - 42.5).abs() < 1e-12));
    }

    #[test]
    fn level_zero_samples_the_axes() {
        let p = build_partition(0).unwrap();
        // Image value encodes (row, col) so each sample can be traced.
        let (w, h) = (8, 4);
        let data = (0..h)
            .flat_map(|r| (0..w).map(move |c| (r * 100 + c) as f64))
            .collect();
        let img = PlanarImage::new(w, h, 1, data).unwrap();
        let s = from_equirectangular(&img, &p);
        for (i, c) in p.centers().iter().enumerate() {
            let (x, y) = equirect_coords(*c, w, h);
            assert_eq!(s.channel(0)[i], img.bilinear(x, y, 0, true));
        }
        // +z sits on the north pole, clamped to row 0.
        let (_, y) = equirect_coords(p.centers()[0], w, h);
        assert!(y < 0.0);
        let (lon, lat) = lon_lat(p.centers()[2]);
        assert_eq!((lon, lat), (0.0, 0.0));
    }

    #[test]
    fn latitude_gradient_is_monotone_in_z() {
        let p = build_partition(3).unwrap();
        let (w, h) = (64, 32);
        let data = (0..h)
            .flat_map(|r| (0..w).map(move |_| 255.0 * (h - 1 - r) as f64 / (h - 1) as f64))
            .collect();
        let img = PlanarImage::new(w, h, 1, data).unwrap();
        let s = from_equirectangular(&img, &p);
        let mut pairs: Vec<(f64, f64)> = p
            .centers()
            .iter()
            .zip(s.channel(0))
            .map(|(c, &v)| (c[2], v))
            .collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        for win in pairs.windows(2) {
            assert!(win[1].1 >= win[0].1 - 1e-9);
        }
    }

    #[test]
    fn rendering_examples() {
        let p = build_partition(2).unwrap();
        let s = SphericalSignal::constant(2, 1, 7.0);
        let img = to_equirectangular(&s, &p, 16, 8).unwrap();
        assert!(img.data.iter().all(|&v| v == 7.0));

        let s = SphericalSignal::from_values(2, (0..96).map(f64::from).collect()).unwrap();
        let one = to_equirectangular(&s, &p, 1, 1).unwrap();
        let back = from_equirectangular(&one, &p);
        assert!(back.channel(0).iter().all(|&v| v == one.data[0]));
        assert!(to_equirectangular(&s, &p, 0, 1).is_err());
    }

    #[test]
    fn single_face_two_by_two() {
        let p = build_partition(1).unwrap();
        let img = PlanarImage::new(2, 2, 1, vec![10.0, 20.0, 30.0, 40.0]).unwrap();
        let s = single_face_ingest(&img, 0, &p).unwrap();
        let v = s.channel(0);
        // Children of +z: (low u, low v), (high u, low v), (low u, high v), (high u, high v).
        // Row 0 is v = +1, so the low-v children read the bottom row.
        assert_eq!(&v[0..4], &[30.0, 40.0, 10.0, 20.0]);
        assert!(v[4..].iter().all(|&x| x == 25.0));
    }

    #[test]
    fn single_face_constant_and_errors() {
        let p = build_partition(2).unwrap();
        let img = PlanarImage::filled(5, 5, 1, 3.0);
        let s = single_face_ingest(&img, 4, &p).unwrap();
        assert!(s.iter().all(|v| (v - 3.0).abs() < 1e-12));
        let bad = PlanarImage::filled(5, 4, 1, 3.0);
        assert!(matches!(
            single_face_ingest(&bad, 0, &p),
            Err(Error::Domain(_))
        ));
        assert!(single_face_ingest(&img, 6, &p).is_err());
    }
}
