//! Equal-area hierarchical quadtree partition of the unit sphere.
//!
//! Each of the six base faces is the image of the parameter square
//! `[-1,1]²` under the gnomonic cap map `T(u,v) = (u,v,1)/√(u²+v²+1)`
//! followed by a fixed rotation. Every parameter rectangle is split into
//! four children of equal spherical area: first along its longer parameter
//! axis, then each half independently along the other axis.
//!
//! Patches at level `j` are indexed canonically by
//! `face·4^j + path`, where `path` is the base-4 numeral of child digits
//! (most significant first). Child digits are
//! `0 = (low u, low v)`, `1 = (high u, low v)`, `2 = (low u, high v)`,
//! `3 = (high u, high v)`, so the children of index `p` are `4p..4p+4`.

use std::fmt;

use serde::Serialize;

use crate::error::{Error, Result};

pub const FACE_COUNT: usize = 6;

/// Largest level `build_partition` accepts.
pub const DEFAULT_MAX_LEVEL: u32 = 10;

/// Absolute tolerance on split coordinates found by bisection.
const SPLIT_TOL: f64 = 1e-13;

/// Tolerance on the norm of points handed to [`Partition::locate`].
const UNIT_TOL: f64 = 1e-9;

pub type Vec3 = [f64; 3];

/// Number of patches at level `j`.
pub fn patch_count(level: u32) -> usize {
    FACE_COUNT << (2 * level)
}

/// The six base faces, in canonical order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Face {
    PosZ,
    NegZ,
    PosX,
    NegX,
    PosY,
    NegY,
}

impl Face {
    pub const ALL: [Face; FACE_COUNT] = [
        Face::PosZ,
        Face::NegZ,
        Face::PosX,
        Face::NegX,
        Face::PosY,
        Face::NegY,
    ];

    pub fn from_index(index: usize) -> Result<Face> {
        Face::ALL
            .get(index)
            .copied()
            .ok_or_else(|| Error::Domain(format!("face index {index} not in [0, 6)")))
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn label(self) -> &'static str {
        match self {
            Face::PosZ => "+z",
            Face::NegZ => "-z",
            Face::PosX => "+x",
            Face::NegX => "-x",
            Face::PosY => "+y",
            Face::NegY => "-y",
        }
    }

    /// Rotates a point of the `+z` cap onto this face.
    ///
    /// The rotations are proper (determinant 1) and send the cap center
    /// `(0,0,1)` to the face's axis direction.
    pub fn rotate(self, [a, b, c]: Vec3) -> Vec3 {
        match self {
            Face::PosZ => [a, b, c],
            Face::NegZ => [a, -b, -c],
            Face::PosX => [c, b, -a],
            Face::NegX => [-c, b, a],
            Face::PosY => [a, c, -b],
            Face::NegY => [a, -c, b],
        }
    }

    /// Inverse of [`Face::rotate`].
    pub fn unrotate(self, [x, y, z]: Vec3) -> Vec3 {
        match self {
            Face::PosZ => [x, y, z],
            Face::NegZ => [x, -y, -z],
            Face::PosX => [-z, y, x],
            Face::NegX => [z, y, -x],
            Face::PosY => [x, -z, y],
            Face::NegY => [x, z, -y],
        }
    }

    /// Face whose cap contains `p`: the axis of largest magnitude, ties
    /// resolved by canonical face order.
    pub fn containing(p: Vec3) -> Face {
        let [x, y, z] = p.map(f64::abs);
        if z >= x && z >= y {
            if p[2] >= 0.0 {
                Face::PosZ
            } else {
                Face::NegZ
            }
        } else if x >= y {
            if p[0] >= 0.0 {
                Face::PosX
            } else {
                Face::NegX
            }
        } else if p[1] >= 0.0 {
            Face::PosY
        } else {
            Face::NegY
        }
    }
}

impl fmt::Display for Face {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// The gnomonic cap map `T` onto the `+z` face.
pub fn cap_map(u: f64, v: f64) -> Vec3 {
    let n = (u * u + v * v + 1.0).sqrt();
    [u / n, v / n, 1.0 / n]
}

/// Maps face parameters `(u, v) ∈ [-1,1]²` to a point on the unit sphere.
pub fn face_map(face: usize, u: f64, v: f64) -> Result<Vec3> {
    let face = Face::from_index(face)?;
    if !(-1.0..=1.0).contains(&u) || !(-1.0..=1.0).contains(&v) {
        return Err(Error::Domain(format!(
            "face parameters ({u}, {v}) outside [-1,1]²"
        )));
    }
    Ok(face.rotate(cap_map(u, v)))
}

/// Identifies a patch by base face and child-digit path from the root.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct PatchId {
    face: u8,
    path: Vec<u8>,
}

impl PatchId {
    pub fn new(face: usize, path: Vec<u8>) -> Result<PatchId> {
        if face >= FACE_COUNT {
            return Err(Error::Domain(format!("face index {face} not in [0, 6)")));
        }
        if let Some(d) = path.iter().find(|&&d| d >= 4) {
            return Err(Error::Domain(format!("path digit {d} not in [0, 4)")));
        }
        Ok(PatchId {
            face: face as u8,
            path,
        })
    }

    /// Inverse of [`PatchId::index`].
    pub fn from_index(level: u32, index: usize) -> Result<PatchId> {
        if index >= patch_count(level) {
            return Err(Error::Lookup(format!(
                "index {index} out of range at level {level}"
            )));
        }
        let path = (0..level)
            .rev()
            .map(|k| ((index >> (2 * k)) & 3) as u8)
            .collect();
        Ok(PatchId {
            face: (index >> (2 * level)) as u8,
            path,
        })
    }

    pub fn face(&self) -> usize {
        self.face as usize
    }

    pub fn path(&self) -> &[u8] {
        &self.path
    }

    pub fn level(&self) -> u32 {
        self.path.len() as u32
    }

    /// Canonical linear index at this patch's level.
    pub fn index(&self) -> usize {
        self.path
            .iter()
            .fold(self.face as usize, |acc, &d| 4 * acc + d as usize)
    }

    pub fn parent(&self) -> Option<PatchId> {
        let mut path = self.path.clone();
        path.pop()?;
        Some(PatchId {
            face: self.face,
            path,
        })
    }
}

/// Preimage of a patch in its face's parameter square.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ParamRect {
    pub face: u8,
    pub u_lo: f64,
    pub u_hi: f64,
    pub v_lo: f64,
    pub v_hi: f64,
}

impl ParamRect {
    pub fn full_face(face: usize) -> ParamRect {
        ParamRect {
            face: face as u8,
            u_lo: -1.0,
            u_hi: 1.0,
            v_lo: -1.0,
            v_hi: 1.0,
        }
    }

    pub fn new(face: usize, u_lo: f64, u_hi: f64, v_lo: f64, v_hi: f64) -> Result<ParamRect> {
        Face::from_index(face)?;
        let ordered = -1.0 <= u_lo && u_lo < u_hi && u_hi <= 1.0;
        let ordered = ordered && -1.0 <= v_lo && v_lo < v_hi && v_hi <= 1.0;
        if !ordered {
            return Err(Error::Domain(format!(
                "invalid rectangle [{u_lo}, {u_hi}] x [{v_lo}, {v_hi}]"
            )));
        }
        Ok(ParamRect {
            face: face as u8,
            u_lo,
            u_hi,
            v_lo,
            v_hi,
        })
    }

    pub fn midpoint(&self) -> (f64, f64) {
        (0.5 * (self.u_lo + self.u_hi), 0.5 * (self.v_lo + self.v_hi))
    }

    pub fn contains(&self, u: f64, v: f64) -> bool {
        (self.u_lo..=self.u_hi).contains(&u) && (self.v_lo..=self.v_hi).contains(&v)
    }

    pub fn contains_rect(&self, other: &ParamRect) -> bool {
        self.face == other.face
            && self.u_lo <= other.u_lo
            && other.u_hi <= self.u_hi
            && self.v_lo <= other.v_lo
            && other.v_hi <= self.v_hi
    }

    /// Euclidean diameter in parameter space.
    pub fn param_diameter(&self) -> f64 {
        (self.u_hi - self.u_lo).hypot(self.v_hi - self.v_lo)
    }

    /// Spherical area of the rectangle's image under the cap map.
    pub fn area(&self) -> f64 {
        rect_area(self)
    }
}

/// Signed solid angle subtended by `[0,a]×[0,b]` under the cap map.
fn corner_angle(a: f64, b: f64) -> f64 {
    (a * b / (1.0 + a * a + b * b).sqrt()).atan()
}

fn area_of(u_lo: f64, u_hi: f64, v_lo: f64, v_hi: f64) -> f64 {
    corner_angle(u_hi, v_hi) - corner_angle(u_lo, v_hi) - corner_angle(u_hi, v_lo)
        + corner_angle(u_lo, v_lo)
}

/// Spherical area in steradians of a parameter rectangle's image.
pub fn rect_area(rect: &ParamRect) -> f64 {
    area_of(rect.u_lo, rect.u_hi, rect.v_lo, rect.v_hi)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    U,
    V,
}

/// Split positions of one internal node.
///
/// `second_lo` and `second_hi` are the split positions along the other
/// axis for the low and high halves of the first split.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Split {
    pub first_axis: Axis,
    pub first: f64,
    pub second_lo: f64,
    pub second_hi: f64,
}

impl Split {
    /// Child digit of the point `(u, v)`, using half-open intervals
    /// `[lo, split)` and `[split, hi]`.
    pub fn child_digit(&self, u: f64, v: f64) -> usize {
        match self.first_axis {
            Axis::U => {
                let high_u = u >= self.first;
                let second = if high_u {
                    self.second_hi
                } else {
                    self.second_lo
                };
                usize::from(high_u) + 2 * usize::from(v >= second)
            }
            Axis::V => {
                let high_v = v >= self.first;
                let second = if high_v {
                    self.second_hi
                } else {
                    self.second_lo
                };
                usize::from(u >= second) + 2 * usize::from(high_v)
            }
        }
    }

    /// The four children of `rect`, in child-digit order.
    pub fn children(&self, rect: &ParamRect) -> [ParamRect; 4] {
        let r = |u_lo, u_hi, v_lo, v_hi| ParamRect {
            face: rect.face,
            u_lo,
            u_hi,
            v_lo,
            v_hi,
        };
        let (s, lo, hi) = (self.first, self.second_lo, self.second_hi);
        match self.first_axis {
            Axis::U => [
                r(rect.u_lo, s, rect.v_lo, lo),
                r(s, rect.u_hi, rect.v_lo, hi),
                r(rect.u_lo, s, lo, rect.v_hi),
                r(s, rect.u_hi, hi, rect.v_hi),
            ],
            Axis::V => [
                r(rect.u_lo, lo, rect.v_lo, s),
                r(lo, rect.u_hi, rect.v_lo, s),
                r(rect.u_lo, hi, s, rect.v_hi),
                r(hi, rect.u_hi, s, rect.v_hi),
            ],
        }
    }
}

/// Finds `s` in `[lo, hi]` where `balance(s) = area(lo..s) − area(s..hi)`
/// changes sign. `balance` must be increasing.
fn bisect(mut lo: f64, mut hi: f64, balance: impl Fn(f64) -> f64) -> f64 {
    while hi - lo > SPLIT_TOL {
        let mid = lo + 0.5 * (hi - lo);
        let b = balance(mid);
        if b == 0.0 {
            return mid;
        }
        if b < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo + 0.5 * (hi - lo)
}

/// Equal-area split of `rect`, longer axis first (ties split `u` first).
pub fn equal_area_split(rect: &ParamRect) -> Split {
    let ParamRect {
        u_lo,
        u_hi,
        v_lo,
        v_hi,
        ..
    } = *rect;
    let split_u = |v0: f64, v1: f64| {
        bisect(u_lo, u_hi, |s| {
            area_of(u_lo, s, v0, v1) - area_of(s, u_hi, v0, v1)
        })
    };
    let split_v = |u0: f64, u1: f64| {
        bisect(v_lo, v_hi, |t| {
            area_of(u0, u1, v_lo, t) - area_of(u0, u1, t, v_hi)
        })
    };
    if u_hi - u_lo >= v_hi - v_lo {
        let s = split_u(v_lo, v_hi);
        Split {
            first_axis: Axis::U,
            first: s,
            second_lo: split_v(u_lo, s),
            second_hi: split_v(s, u_hi),
        }
    } else {
        let t = split_v(u_lo, u_hi);
        Split {
            first_axis: Axis::V,
            first: t,
            second_lo: split_u(v_lo, t),
            second_hi: split_u(t, v_hi),
        }
    }
}

/// Area statistics over the leaves of a partition.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct AreaStats {
    pub count: usize,
    pub min: f64,
    pub max: f64,
    pub mean: f64,
    pub total: f64,
    /// Largest `|area − target| / target` over leaves.
    pub max_rel_deviation: f64,
}

/// Split record of one internal node, for export.
#[derive(Clone, Debug, Serialize)]
pub struct NodeSplit {
    pub level: u32,
    pub index: usize,
    #[serde(flatten)]
    pub split: Split,
}

/// Exportable description of a partition.
#[derive(Clone, Debug, Serialize)]
pub struct PartitionMetadata {
    #[serde(rename = "J")]
    pub level: u32,
    pub face_order: Vec<&'static str>,
    pub splits: Vec<NodeSplit>,
}

/// The full quadtree down to level `J`. Immutable once built.
#[derive(Clone, Debug)]
pub struct Partition {
    level: u32,
    /// `rects[j]` holds every level-`j` rectangle in canonical order.
    rects: Vec<Vec<ParamRect>>,
    /// `splits[j]` holds the split of every level-`j` node, `j < J`.
    splits: Vec<Vec<Split>>,
    centers: Vec<Vec3>,
}

/// Builds the partition to level `level`, refusing levels above
/// [`DEFAULT_MAX_LEVEL`].
pub fn build_partition(level: u32) -> Result<Partition> {
    build_partition_with_max(level, DEFAULT_MAX_LEVEL)
}

pub fn build_partition_with_max(level: u32, max_level: u32) -> Result<Partition> {
    if level > max_level {
        return Err(Error::Resource(format!(
            "partition level {level} exceeds maximum {max_level}"
        )));
    }
    let mut rects = vec![(0..FACE_COUNT)
        .map(ParamRect::full_face)
        .collect::<Vec<_>>()];
    let mut splits = Vec::with_capacity(level as usize);
    for _ in 0..level {
        let parents = rects.last().expect("root level present");
        let level_splits: Vec<Split> = parents.iter().map(equal_area_split).collect();
        let children = parents
            .iter()
            .zip(&level_splits)
            .flat_map(|(rect, split)| split.children(rect))
            .collect();
        splits.push(level_splits);
        rects.push(children);
    }
    let centers = rects[level as usize]
        .iter()
        .map(|r| {
            let (u, v) = r.midpoint();
            Face::ALL[r.face as usize].rotate(cap_map(u, v))
        })
        .collect();
    Ok(Partition {
        level,
        rects,
        splits,
        centers,
    })
}

impl Partition {
    /// Leaf level `J`.
    pub fn level(&self) -> u32 {
        self.level
    }

    pub fn leaf_count(&self) -> usize {
        patch_count(self.level)
    }

    /// Rectangles at level `j ≤ J`, in canonical order.
    pub fn rects(&self, level: u32) -> Option<&[ParamRect]> {
        self.rects.get(level as usize).map(Vec::as_slice)
    }

    pub fn leaf_rects(&self) -> &[ParamRect] {
        &self.rects[self.level as usize]
    }

    /// Splits of the internal nodes at level `j < J`.
    pub fn splits(&self, level: u32) -> Option<&[Split]> {
        self.splits.get(level as usize).map(Vec::as_slice)
    }

    pub fn rect(&self, id: &PatchId) -> Result<ParamRect> {
        self.rects
            .get(id.level() as usize)
            .and_then(|level| level.get(id.index()))
            .copied()
            .ok_or_else(|| Error::Lookup(format!("patch {id:?} not in partition")))
    }

    /// Leaf centers in canonical order.
    pub fn centers(&self) -> &[Vec3] {
        &self.centers
    }

    /// Image of the parameter midpoint of a leaf patch.
    pub fn patch_center(&self, id: &PatchId) -> Result<Vec3> {
        if id.level() != self.level {
            return Err(Error::Lookup(format!(
                "patch at level {} is not a leaf of a level-{} partition",
                id.level(),
                self.level
            )));
        }
        Ok(self.centers[id.index()])
    }

    /// Canonical index of the leaf containing the unit vector `p`.
    pub fn locate_index(&self, p: Vec3) -> Result<usize> {
        let norm = (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt();
        if norm.is_nan() || (norm - 1.0).abs() > UNIT_TOL {
            return Err(Error::Domain(format!("point norm {norm} is not 1")));
        }
        let face = Face::containing(p);
        let [a, b, c] = face.unrotate(p);
        let u = (a / c).clamp(-1.0, 1.0);
        let v = (b / c).clamp(-1.0, 1.0);
        let mut index = face.index();
        for level_splits in &self.splits {
            index = 4 * index + level_splits[index].child_digit(u, v);
        }
        Ok(index)
    }

    /// Leaf patch containing the unit vector `p`.
    pub fn locate(&self, p: Vec3) -> Result<PatchId> {
        PatchId::from_index(self.level, self.locate_index(p)?)
    }

    pub fn leaf_area_stats(&self) -> AreaStats {
        let target = 4.0 * std::f64::consts::PI / self.leaf_count() as f64;
        let mut stats = AreaStats {
            count: self.leaf_count(),
            min: f64::INFINITY,
            max: f64::NEG_INFINITY,
            mean: 0.0,
            total: 0.0,
            max_rel_deviation: 0.0,
        };
        for rect in self.leaf_rects() {
            let a = rect.area();
            stats.min = stats.min.min(a);
            stats.max = stats.max.max(a);
            stats.total += a;
            stats.max_rel_deviation = stats.max_rel_deviation.max((a - target).abs() / target);
        }
        stats.mean = stats.total / stats.count as f64;
        stats
    }

    pub fn metadata(&self) -> PartitionMetadata {
        let splits = self
            .splits
            .iter()
            .enumerate()
            .flat_map(|(level, level_splits)| {
                level_splits
                    .iter()
                    .enumerate()
                    .map(move |(index, split)| NodeSplit {
                        level: level as u32,
                        index,
                        split: *split,
                    })
            })
            .collect();
        PartitionMetadata {
            level: self.level,
            face_order: Face::ALL.iter().map(|f| f.label()).collect(),
            splits,
        }
    }
}

#[cfg(test)]
mod tests {
    use std::f64::consts::PI;

    use super::*;

    fn close(a: Vec3, b: Vec3, tol: f64) -> bool {
        a.iter().zip(&b).all(|(x, y)| (x - y).abs() <= tol)
    }

    #[test]
    fn face_map_examples() {
        assert!(close(face_map(0, 0.0, 0.0).unwrap(), [0.0, 0.0, 1.0], 0.0));
        let s = 1.0 / 3f64.sqrt();
        assert!(close(face_map(0, 1.0, 1.0).unwrap(), [s, s, s], 1e-15));
        assert!(close(face_map(1, 0.0, 0.0).unwrap(), [0.0, 0.0, -1.0], 0.0));
    }

    #[test]
    fn face_centers_are_axes() {
        let axes = [
            [0.0, 0.0, 1.0],
            [0.0, 0.0, -1.0],
            [1.0, 0.0, 0.0],
            [-1.0, 0.0, 0.0],
            [0.0, 1.0, 0.0],
            [0.0, -1.0, 0.0],
        ];
        for (face, axis) in axes.into_iter().enumerate() {
            assert!(
                close(face_map(face, 0.0, 0.0).unwrap(), axis, 0.0),
                "face {face}"
            );
        }
    }

    #[test]
    fn rotations_are_proper_and_invertible() {
        let basis = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
        for face in Face::ALL {
            let [e0, e1, e2] = basis.map(|e| face.rotate(e));
            let det = e0[0] * (e1[1] * e2[2] - e1[2] * e2[1])
                - e0[1] * (e1[0] * e2[2] - e1[2] * e2[0])
                + e0[2] * (e1[0] * e2[1] - e1[1] * e2[0]);
            assert_eq!(det, 1.0, "{face}");
            let p = [0.3, -0.5, 0.8];
            assert_eq!(face.unrotate(face.rotate(p)), p);
        }
    }

    #[test]
    fn face_map_rejects_bad_input() {
        assert!(matches!(face_map(6, 0.0, 0.0), Err(Error::Domain(_))));
        assert!(matches!(face_map(0, 1.5, 0.0), Err(Error::Domain(_))));
        assert!(matches!(face_map(0, 0.0, f64::NAN), Err(Error::Domain(_))));
    }

    #[test]
    fn rect_area_examples() {
        let full = ParamRect::full_face(0);
        assert!((full.area() - 2.0 * PI / 3.0).abs() < 1e-15);
        let quad = ParamRect::new(0, 0.0, 1.0, 0.0, 1.0).unwrap();
        assert!((quad.area() - PI / 6.0).abs() < 1e-15);
        let strip = ParamRect::new(0, 0.0, 0.5, 0.0, 1.0).unwrap();
        assert!((strip.area() - 0.321_750_554_396_642_2).abs() < 1e-10);
    }

    #[test]
    fn patch_id_index_round_trip() {
        let id = PatchId::new(3, vec![2, 0, 1]).unwrap();
        assert_eq!(id.index(), 3 * 64 + 2 * 16 + 1);
        assert_eq!(PatchId::from_index(3, id.index()).unwrap(), id);
        assert_eq!(id.parent().unwrap(), PatchId::new(3, vec![2, 0]).unwrap());
        assert!(PatchId::new(6, vec![]).is_err());
        assert!(PatchId::new(0, vec![4]).is_err());
        assert!(matches!(PatchId::from_index(1, 24), Err(Error::Lookup(_))));
    }

    #[test]
    fn level_zero_and_one() {
        let p0 = build_partition(0).unwrap();
        assert_eq!(p0.leaf_count(), 6);
        for r in p0.leaf_rects() {
            assert!((r.area() - 2.0 * PI / 3.0).abs() < 1e-14);
        }
        let p1 = build_partition(1).unwrap();
        assert_eq!(p1.leaf_count(), 24);
        for r in p1.leaf_rects() {
            assert!((r.area() - PI / 6.0).abs() < 1e-14);
        }
        for s in p1.splits(0).unwrap() {
            assert_eq!((s.first, s.second_lo, s.second_hi), (0.0, 0.0, 0.0));
        }
    }

    #[test]
    fn level_two_splits_are_off_midpoint() {
        let p = build_partition(2).unwrap();
        let target = PI / 24.0;
        for r in p.leaf_rects() {
            assert!((r.area() - target).abs() / target < 1e-12);
        }
        let child = p.rects(1).unwrap()[3];
        let split = p.splits(1).unwrap()[3];
        let (mu, _) = child.midpoint();
        assert!((split.first - mu).abs() > 1e-3);
    }

    #[test]
    fn children_tile_and_sum_to_parent() {
        let p = build_partition(4).unwrap();
        for j in 0..4 {
            let parents = p.rects(j).unwrap();
            let children = p.rects(j + 1).unwrap();
            for (k, parent) in parents.iter().enumerate() {
                let kids = &children[4 * k..4 * k + 4];
                let sum: f64 = kids.iter().map(ParamRect::area).sum();
                assert!((sum - parent.area()).abs() / parent.area() < 1e-12);
                for kid in kids {
                    assert!(parent.contains_rect(kid));
                }
            }
        }
    }

    #[test]
    fn build_respects_max_level() {
        assert!(matches!(build_partition(11), Err(Error::Resource(_))));
        assert!(matches!(
            build_partition_with_max(3, 2),
            Err(Error::Resource(_))
        ));
    }

    #[test]
    fn patch_center_examples() {
        let p0 = build_partition(0).unwrap();
        let c = p0.patch_center(&PatchId::new(0, vec![]).unwrap()).unwrap();
        assert_eq!(c, [0.0, 0.0, 1.0]);

        let p1 = build_partition(1).unwrap();
        let id = PatchId::new(0, vec![3]).unwrap();
        assert_eq!(
            p1.rect(&id).unwrap(),
            ParamRect::new(0, 0.0, 1.0, 0.0, 1.0).unwrap()
        );
        let n = 1.5f64.sqrt();
        assert!(close(
            p1.patch_center(&id).unwrap(),
            [0.5 / n, 0.5 / n, 1.0 / n],
            1e-15
        ));
        assert!(matches!(
            p1.patch_center(&PatchId::new(0, vec![]).unwrap()),
            Err(Error::Lookup(_))
        ));
    }

    #[test]
    fn locate_tie_breaks() {
        let p1 = build_partition(1).unwrap();
        let id = p1.locate([0.0, 0.0, 1.0]).unwrap();
        assert_eq!(id, PatchId::new(0, vec![3]).unwrap());

        let s = 1.0 / 3f64.sqrt();
        let corner = p1.locate([s, s, s]).unwrap();
        assert_eq!(corner.face(), 0);
        assert_eq!(corner, p1.locate([s, s, s]).unwrap());
        let corner = p1.locate([-s, s, s]).unwrap();
        assert_eq!(corner.face(), 0);
        assert!(matches!(p1.locate([0.0, 0.0, 2.0]), Err(Error::Domain(_))));
    }

    #[test]
    fn locate_inverts_patch_center() {
        for j in 0..=4 {
            let p = build_partition(j).unwrap();
            for (i, c) in p.centers().iter().enumerate() {
                assert_eq!(p.locate_index(*c).unwrap(), i, "level {j}");
            }
        }
    }

    #[test]
    fn centers_lie_in_their_patches() {
        let p = build_partition(3).unwrap();
        for (rect, c) in p.leaf_rects().iter().zip(p.centers()) {
            let norm = c.iter().map(|x| x * x).sum::<f64>().sqrt();
            assert!((norm - 1.0).abs() < 1e-12);
            let [a, b, w] = Face::ALL[rect.face as usize].unrotate(*c);
            assert!(w > 0.0);
            assert!(rect.contains(a / w, b / w));
        }
    }

    #[test]
    fn metadata_lists_every_internal_node() {
        let p = build_partition(2).unwrap();
        let meta = p.metadata();
        assert_eq!(meta.splits.len(), 6 + 24);
        assert_eq!(meta.face_order, ["+z", "-z", "+x", "-x", "+y", "-y"]);
        let json = serde_json::to_value(&meta).unwrap();
        assert_eq!(json["J"], 2);
        assert_eq!(json["splits"][0]["first_axis"], "u");
    }
}
