//! Dense voxel grids, 2D maps and minimum-intensity projection.
//!
//! Volumes are stored x-fastest: the linear index of voxel `(x, y, z)` is
//! `x + X * (y + Y * z)`. 2D maps are stored u-fastest in the same way.

use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One of the three principal axes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    pub const ALL: [Axis; 3] = [Axis::X, Axis::Y, Axis::Z];

    pub fn name(self) -> &'static str {
        match self {
            Axis::X => "x",
            Axis::Y => "y",
            Axis::Z => "z",
        }
    }

    pub fn index(self) -> usize {
        match self {
            Axis::X => 0,
            Axis::Y => 1,
            Axis::Z => 2,
        }
    }
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Axis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "x" | "X" => Ok(Axis::X),
            "y" | "Y" => Ok(Axis::Y),
            "z" | "Z" => Ok(Axis::Z),
            other => Err(Error::Config(format!("unknown axis '{other}'"))),
        }
    }
}

/// Volume extent in voxels.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Dims {
    pub x: usize,
    pub y: usize,
    pub z: usize,
}

impl Dims {
    pub fn new(x: usize, y: usize, z: usize) -> Result<Self> {
        if x == 0 || y == 0 || z == 0 {
            return Err(Error::Validation(format!(
                "dimensions must be positive, got {x}x{y}x{z}"
            )));
        }
        Ok(Dims { x, y, z })
    }

    pub fn cube(n: usize) -> Result<Self> {
        Dims::new(n, n, n)
    }

    pub fn len(&self) -> usize {
        self.x * self.y * self.z
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn as_array(&self) -> [usize; 3] {
        [self.x, self.y, self.z]
    }

    #[inline]
    pub fn index(&self, x: usize, y: usize, z: usize) -> usize {
        x + self.x * (y + self.y * z)
    }

    #[inline]
    pub fn coords(&self, idx: usize) -> [usize; 3] {
        let x = idx % self.x;
        let rest = idx / self.x;
        [x, rest % self.y, rest / self.y]
    }

    /// Shape `(width, height)` of the projection along `axis`.
    pub fn projected(&self, axis: Axis) -> (usize, usize) {
        match axis {
            Axis::X => (self.y, self.z),
            Axis::Y => (self.x, self.z),
            Axis::Z => (self.x, self.y),
        }
    }

    pub fn depth(&self, axis: Axis) -> usize {
        self.as_array()[axis.index()]
    }

    /// Voxel index reached from projected pixel `(u, v)` at depth `d`.
    #[inline]
    pub fn voxel_from_projection(&self, axis: Axis, u: usize, v: usize, d: usize) -> usize {
        match axis {
            Axis::X => self.index(d, u, v),
            Axis::Y => self.index(u, d, v),
            Axis::Z => self.index(u, v, d),
        }
    }

    /// Linear stride between consecutive depth samples along `axis`.
    fn depth_stride(&self, axis: Axis) -> usize {
        match axis {
            Axis::X => 1,
            Axis::Y => self.x,
            Axis::Z => self.x * self.y,
        }
    }
}

impl fmt::Display for Dims {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}x{}", self.x, self.y, self.z)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum VolumeKind {
    Predicted,
    GroundTruth,
}

impl VolumeKind {
    pub fn as_str(self) -> &'static str {
        match self {
            VolumeKind::Predicted => "predicted",
            VolumeKind::GroundTruth => "ground-truth",
        }
    }
}

/// Dense per-voxel distance values in voxel units.
#[derive(Clone, Debug, PartialEq)]
pub struct DistanceVolume {
    dims: Dims,
    values: Vec<f64>,
    kind: VolumeKind,
}

impl DistanceVolume {
    pub fn filled(dims: Dims, value: f64, kind: VolumeKind) -> Self {
        DistanceVolume {
            dims,
            values: vec![value; dims.len()],
            kind,
        }
    }

    /// Builds a volume, checking length, finiteness and non-negativity.
    pub fn from_values(dims: Dims, values: Vec<f64>, kind: VolumeKind) -> Result<Self> {
        if values.len() != dims.len() {
            return Err(Error::shape(dims.len(), values.len()));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::Validation(format!(
                "voxel {:?} holds {}, expected a finite value >= 0",
                dims.coords(i),
                values[i]
            )));
        }
        Ok(DistanceVolume { dims, values, kind })
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn kind(&self) -> VolumeKind {
        self.kind
    }

    pub fn with_kind(mut self, kind: VolumeKind) -> Self {
        self.kind = kind;
        self
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, z: usize) -> f64 {
        self.values[self.dims.index(x, y, z)]
    }

    pub fn max_value(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }

    /// Checks the ground-truth invariant `value <= d_max`.
    pub fn check_truncated(&self, d_max: f64) -> Result<()> {
        match self.values.iter().position(|v| *v > d_max) {
            Some(i) => Err(Error::Validation(format!(
                "ground-truth voxel {:?} = {} exceeds d_max {}",
                self.dims.coords(i),
                self.values[i],
                d_max
            ))),
            None => Ok(()),
        }
    }

    pub fn ensure_same_shape(&self, other: &DistanceVolume) -> Result<()> {
        if self.dims != other.dims {
            return Err(Error::shape(self.dims, other.dims));
        }
        Ok(())
    }
}

/// Dense 2D scalar grid, u-fastest.
#[derive(Clone, Debug, PartialEq)]
pub struct Grid2 {
    width: usize,
    height: usize,
    values: Vec<f64>,
}

impl Grid2 {
    pub fn filled(width: usize, height: usize, value: f64) -> Self {
        Grid2 {
            width,
            height,
            values: vec![value; width * height],
        }
    }

    pub fn from_values(width: usize, height: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != width * height {
            return Err(Error::shape(
                format!("{width}x{height}"),
                format!("{} values", values.len()),
            ));
        }
        Ok(Grid2 {
            width,
            height,
            values,
        })
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut values = Vec::with_capacity(width * height);
        for v in 0..height {
            for u in 0..width {
                values.push(f(u, v));
            }
        }
        Grid2 {
            width,
            height,
            values,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    #[inline]
    pub fn index(&self, u: usize, v: usize) -> usize {
        u + self.width * v
    }

    #[inline]
    pub fn get(&self, u: usize, v: usize) -> f64 {
        self.values[u + self.width * v]
    }

    #[inline]
    pub fn set(&mut self, u: usize, v: usize, value: f64) {
        self.values[u + self.width * v] = value;
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    /// Copies the `w x h` block starting at `(u0, v0)`.
    pub fn crop(&self, u0: usize, v0: usize, w: usize, h: usize) -> Grid2 {
        Grid2::from_fn(w, h, |u, v| self.get(u0 + u, v0 + v))
    }

    pub fn ensure_same_shape(&self, other: &Grid2) -> Result<()> {
        if self.shape() != other.shape() {
            return Err(Error::shape(
                format!("{}x{}", self.width, self.height),
                format!("{}x{}", other.width, other.height),
            ));
        }
        Ok(())
    }

    /// Reads the `z = 0` slice of a single-slice volume.
    pub fn from_slice_volume(vol: &DistanceVolume) -> Result<Grid2> {
        let d = vol.dims();
        if d.z != 1 {
            return Err(Error::shape(format!("{}x{}x1", d.x, d.y), d));
        }
        Grid2::from_values(d.x, d.y, vol.values().to_vec())
    }
}

/// Minimum-intensity projection of a volume along one axis.
#[derive(Clone, Debug, PartialEq)]
pub struct ProjectedMap {
    pub axis: Axis,
    pub values: Grid2,
    /// Depth index along `axis` of the voxel attaining each column minimum.
    pub argmin: Vec<usize>,
}

impl ProjectedMap {
    /// Linear voxel index behind projected pixel `i`.
    pub fn source_voxel(&self, dims: Dims, i: usize) -> usize {
        let w = self.values.width();
        dims.voxel_from_projection(self.axis, i % w, i / w, self.argmin[i])
    }
}

/// Column-wise minimum along `axis`; ties resolve to the smallest depth.
pub fn min_projection(vol: &DistanceVolume, axis: Axis) -> ProjectedMap {
    let dims = vol.dims();
    let (w, h) = dims.projected(axis);
    let depth = dims.depth(axis);
    let stride = dims.depth_stride(axis);
    let src = vol.values();

    let rows: Vec<(Vec<f64>, Vec<usize>)> = (0..h)
        .into_par_iter()
        .map(|v| {
            let mut vals = Vec::with_capacity(w);
            let mut arg = Vec::with_capacity(w);
            for u in 0..w {
                let base = dims.voxel_from_projection(axis, u, v, 0);
                let mut best = src[base];
                let mut best_d = 0;
                for d in 1..depth {
                    let x = src[base + d * stride];
                    if x < best {
                        best = x;
                        best_d = d;
                    }
                }
                vals.push(best);
                arg.push(best_d);
            }
            (vals, arg)
        })
        .collect();

    let mut values = Vec::with_capacity(w * h);
    let mut argmin = Vec::with_capacity(w * h);
    for (vals, arg) in rows {
        values.extend(vals);
        argmin.extend(arg);
    }
    ProjectedMap {
        axis,
        values: Grid2 {
            width: w,
            height: h,
            values,
        },
        argmin,
    }
}
