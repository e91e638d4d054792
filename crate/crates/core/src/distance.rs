//! Truncated distance maps generated from annotation graphs.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{AnnotationGraph, Dimensionality};
use crate::volume::{Dims, DistanceVolume, Grid2, VolumeKind};

pub const DEFAULT_D_MAX: f64 = 15.0;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenConfig {
    /// Truncation distance in voxels.
    pub d_max: f64,
    /// Sampling step along segments, used when rasterizing centerlines to voxels.
    pub step: f64,
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig {
            d_max: DEFAULT_D_MAX,
            step: 0.25,
        }
    }
}

impl GenConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.d_max > 0.0 && self.d_max.is_finite()) {
            return Err(Error::Config(format!(
                "d_max must be > 0, got {}",
                self.d_max
            )));
        }
        if !(self.step > 0.0 && self.step.is_finite()) {
            return Err(Error::Config(format!(
                "step must be > 0, got {}",
                self.step
            )));
        }
        Ok(())
    }
}

/// Euclidean distance from `p` to the closed segment `[a, b]`.
///
/// Interior points use `|ap x ab| / |ab|`, so a point lying on the segment
/// with integer coordinates gets exactly 0.
#[inline]
pub fn point_segment_distance(p: [f64; 3], a: [f64; 3], b: [f64; 3]) -> f64 {
    let ab = [b[0] - a[0], b[1] - a[1], b[2] - a[2]];
    let ap = [p[0] - a[0], p[1] - a[1], p[2] - a[2]];
    let norm = |v: [f64; 3]| (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
    let len2 = ab[0] * ab[0] + ab[1] * ab[1] + ab[2] * ab[2];
    let dot = ap[0] * ab[0] + ap[1] * ab[1] + ap[2] * ab[2];
    if len2 == 0.0 || dot <= 0.0 {
        return norm(ap);
    }
    if dot >= len2 {
        return norm([p[0] - b[0], p[1] - b[1], p[2] - b[2]]);
    }
    let cross = [
        ap[1] * ab[2] - ap[2] * ab[1],
        ap[2] * ab[0] - ap[0] * ab[2],
        ap[0] * ab[1] - ap[1] * ab[0],
    ];
    norm(cross) / len2.sqrt()
}

/// Writes `min(current, distance to segment)` into every voxel of `slab`
/// (voxels `z0..z0 + slab.len() / (X * Y)`) that can be closer than `d_max`.
pub(crate) fn carve_segment(
    slab: &mut [f64],
    dims: Dims,
    z0: usize,
    a: [f64; 3],
    b: [f64; 3],
    d_max: f64,
) {
    let plane = dims.x * dims.y;
    let nz = slab.len() / plane;
    let lo = |i: usize| (a[i].min(b[i]) - d_max).floor().max(0.0) as usize;
    let hi = |i: usize, extent: usize| {
        let h = (a[i].max(b[i]) + d_max).ceil();
        if h < 0.0 {
            None
        } else {
            Some((h as usize).min(extent - 1))
        }
    };
    let (Some(x1), Some(y1), Some(z1)) = (hi(0, dims.x), hi(1, dims.y), hi(2, dims.z)) else {
        return;
    };
    let (x0, y0) = (lo(0), lo(1));
    let zs = lo(2).max(z0);
    let ze = z1.min(z0 + nz - 1);
    if zs > ze || x0 > x1 || y0 > y1 {
        return;
    }
    for z in zs..=ze {
        for y in y0..=y1 {
            let row = (z - z0) * plane + y * dims.x;
            for x in x0..=x1 {
                let d = point_segment_distance([x as f64, y as f64, z as f64], a, b);
                let cell = &mut slab[row + x];
                if d < *cell {
                    *cell = d;
                }
            }
        }
    }
}

/// Ground-truth volume: per-voxel distance to the nearest edge, truncated at `d_max`.
pub fn gen_distance_map(
    graph: &AnnotationGraph,
    dims: Dims,
    cfg: &GenConfig,
) -> Result<DistanceVolume> {
    cfg.validate()?;
    if graph.dimensionality() == Dimensionality::Two && dims.z != 1 {
        return Err(Error::Validation(format!(
            "2D graph cannot be rasterized into a {dims} volume"
        )));
    }
    let segments = graph.segments();
    let plane = dims.x * dims.y;
    let mut values = vec![cfg.d_max; dims.len()];
    values
        .par_chunks_mut(plane)
        .enumerate()
        .for_each(|(z, slab)| {
            for &(a, b) in &segments {
                carve_segment(slab, dims, z, a, b, cfg.d_max);
            }
        });
    DistanceVolume::from_values(dims, values, VolumeKind::GroundTruth)
}

/// 2D ground-truth map for a graph with `z == 0`.
pub fn gen_distance_map_2d(
    graph: &AnnotationGraph,
    width: usize,
    height: usize,
    cfg: &GenConfig,
) -> Result<Grid2> {
    let vol = gen_distance_map(graph, Dims::new(width, height, 1)?, cfg)?;
    Grid2::from_slice_volume(&vol)
}

/// Voxels visited when walking every edge at `cfg.step`, rounded to the
/// nearest lattice point. Sorted, without duplicates.
pub fn rasterize_centerline(graph: &AnnotationGraph, dims: Dims, cfg: &GenConfig) -> Vec<usize> {
    let mut out = Vec::new();
    let clamp = |c: f64, extent: usize| (c.round().max(0.0) as usize).min(extent - 1);
    for (a, b) in graph.segments() {
        let len = point_segment_distance(a, b, b);
        let n = (len / cfg.step).ceil().max(1.0) as usize;
        for k in 0..=n {
            let t = k as f64 / n as f64;
            let p = [
                a[0] + t * (b[0] - a[0]),
                a[1] + t * (b[1] - a[1]),
                a[2] + t * (b[2] - a[2]),
            ];
            out.push(dims.index(
                clamp(p[0], dims.x),
                clamp(p[1], dims.y),
                clamp(p[2], dims.z),
            ));
        }
    }
    for n in graph.nodes() {
        let p = n.pos;
        out.push(dims.index(
            clamp(p[0], dims.x),
            clamp(p[1], dims.y),
            clamp(p[2], dims.z),
        ));
    }
    out.sort_unstable();
    out.dedup();
    out
}
