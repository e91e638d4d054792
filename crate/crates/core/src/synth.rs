//! Synthetic scenes: tubes along polylines plus scripted prediction corruptions.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::distance::{carve_segment, gen_distance_map, GenConfig, DEFAULT_D_MAX};
use crate::error::{Error, Result};
use crate::graph::{AnnotationGraph, Node};
use crate::volume::{Dims, DistanceVolume, VolumeKind};

fn default_d_max() -> f64 {
    DEFAULT_D_MAX
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tube {
    pub points: Vec<[f64; 3]>,
    pub radius: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Corruption {
    /// Raises every voxel within `length / 2` of `center` to `d_max`.
    Gap { center: [f64; 3], length: f64 },
    /// Carves a zero-distance segment between two points.
    MergeBridge { from: [f64; 3], to: [f64; 3] },
    /// Additive Gaussian noise, clamped at zero.
    Noise { sigma: f64, seed: u64 },
    /// Constant added to every voxel, clamped at zero.
    Offset { value: f64 },
    /// Translates the map by a whole-voxel offset; uncovered voxels get `d_max`.
    Shift { offset: [i64; 3] },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scene {
    pub dims: [usize; 3],
    #[serde(default = "default_d_max")]
    pub d_max: f64,
    pub tubes: Vec<Tube>,
    #[serde(default)]
    pub corruptions: Vec<Corruption>,
}

#[derive(Clone, Debug)]
pub struct SynthOutput {
    pub ground_truth: DistanceVolume,
    pub graph: AnnotationGraph,
    pub prediction: DistanceVolume,
    /// Voxels covered by a gap ball.
    pub gap_mask: Vec<bool>,
}

impl Scene {
    pub fn dims(&self) -> Result<Dims> {
        Dims::new(self.dims[0], self.dims[1], self.dims[2])
    }

    /// Tube centerlines as an annotation graph; ids run from 1 in tube order.
    pub fn graph(&self) -> Result<AnnotationGraph> {
        let dims = self.dims()?;
        let mut nodes = Vec::new();
        let mut edges = Vec::new();
        for (t, tube) in self.tubes.iter().enumerate() {
            if tube.points.len() < 2 {
                return Err(Error::Validation(format!(
                    "tube {t} needs at least 2 points"
                )));
            }
            if tube.radius.is_nan() || tube.radius <= 0.0 {
                return Err(Error::Validation(format!(
                    "tube {t} has radius {}",
                    tube.radius
                )));
            }
            let first = nodes.len() as i64 + 1;
            for (k, &p) in tube.points.iter().enumerate() {
                let id = first + k as i64;
                nodes.push(Node { id, pos: p });
                if k > 0 {
                    edges.push((id - 1, id));
                }
            }
        }
        AnnotationGraph::new(nodes, edges, dims).map_err(|e| match e {
            Error::Validation(msg) => Error::Validation(format!("invalid scene: {msg}")),
            other => other,
        })
    }
}

pub fn synth_volume(scene: &Scene) -> Result<SynthOutput> {
    let dims = scene.dims()?;
    let cfg = GenConfig {
        d_max: scene.d_max,
        ..GenConfig::default()
    };
    cfg.validate()?;
    let graph = scene.graph()?;
    let ground_truth = gen_distance_map(&graph, dims, &cfg)?;
    let mut pred = ground_truth.values().to_vec();
    let mut gap_mask = vec![false; dims.len()];

    for c in &scene.corruptions {
        match *c {
            Corruption::Gap { center, length } => {
                if length.is_nan() || length <= 0.0 {
                    return Err(Error::Validation(format!(
                        "gap length {length} must be > 0"
                    )));
                }
                let r2 = (length / 2.0).powi(2);
                for (i, v) in pred.iter_mut().enumerate() {
                    let [x, y, z] = dims.coords(i);
                    let d2 = (x as f64 - center[0]).powi(2)
                        + (y as f64 - center[1]).powi(2)
                        + (z as f64 - center[2]).powi(2);
                    if d2 <= r2 {
                        *v = scene.d_max;
                        gap_mask[i] = true;
                    }
                }
            }
            Corruption::MergeBridge { from, to } => {
                carve_segment(&mut pred, dims, 0, from, to, scene.d_max);
            }
            Corruption::Noise { sigma, seed } => {
                let normal = Normal::new(0.0, sigma)
                    .map_err(|e| Error::Validation(format!("noise sigma {sigma}: {e}")))?;
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                for v in pred.iter_mut() {
                    *v = (*v + normal.sample(&mut rng)).max(0.0);
                }
            }
            Corruption::Offset { value } => {
                for v in pred.iter_mut() {
                    *v = (*v + value).max(0.0);
                }
            }
            Corruption::Shift { offset } => {
                let src = pred.clone();
                let ext = dims.as_array().map(|e| e as i64);
                for (i, v) in pred.iter_mut().enumerate() {
                    let c = dims.coords(i);
                    let from: Vec<i64> = (0..3).map(|k| c[k] as i64 - offset[k]).collect();
                    *v = if (0..3).all(|k| from[k] >= 0 && from[k] < ext[k]) {
                        src[dims.index(from[0] as usize, from[1] as usize, from[2] as usize)]
                    } else {
                        scene.d_max
                    };
                }
            }
        }
    }

    let prediction = DistanceVolume::from_values(dims, pred, VolumeKind::Predicted)?;
    Ok(SynthOutput {
        ground_truth,
        graph,
        prediction,
        gap_mask,
    })
}

/// The 13 lattice directions, one per antipodal pair.
pub fn lattice_directions(flat: bool) -> Vec<[i64; 3]> {
    (-1..=1)
        .flat_map(|a| (-1..=1).flat_map(move |b| (-1..=1).map(move |c| [a, b, c])))
        .filter(|d| *d > [0, 0, 0])
        .filter(|d| !flat || d[2] == 0)
        .collect()
}

/// Maximal lattice segment through a random integer point at least `margin`
/// voxels inside every face, along a random lattice direction. With `flat`,
/// only directions in the z = 0 plane are used and z stays 0.
pub fn lattice_segment(
    extent: [usize; 3],
    margin: usize,
    flat: bool,
    rng: &mut impl Rng,
) -> ([i64; 3], [i64; 3]) {
    let dirs = lattice_directions(flat);
    let d = dirs[rng.random_range(0..dirs.len())];
    let mut p = [0i64; 3];
    for k in 0..3 {
        p[k] = if extent[k] > 2 * margin {
            rng.random_range(margin as i64..(extent[k] - margin) as i64)
        } else {
            (extent[k] / 2) as i64
        };
    }
    let inside = |q: [i64; 3]| (0..3).all(|k| q[k] >= 0 && q[k] < extent[k] as i64);
    let walk = |sign: i64| {
        let mut q = p;
        loop {
            let next = [q[0] + sign * d[0], q[1] + sign * d[1], q[2] + sign * d[2]];
            if !inside(next) {
                return q;
            }
            q = next;
        }
    };
    (walk(-1), walk(1))
}

fn as_point(p: [i64; 3]) -> [f64; 3] {
    p.map(|c| c as f64)
}

/// 32^3 volume, one tube along z through (16, 16), gap of length 4 at z = 16.
pub fn gap_fixture() -> Scene {
    Scene {
        dims: [32, 32, 32],
        d_max: DEFAULT_D_MAX,
        tubes: vec![Tube {
            points: vec![[16.0, 16.0, 0.0], [16.0, 16.0, 31.0]],
            radius: 2.0,
        }],
        corruptions: vec![Corruption::Gap {
            center: [16.0, 16.0, 16.0],
            length: 4.0,
        }],
    }
}

/// One lattice-direction tube crossing a `size^3` volume, placed at least
/// `margin` voxels from the faces it does not cross, optionally with a gap
/// centred on the lattice point at the middle of the tube.
pub fn random_tube_scene(
    size: usize,
    margin: usize,
    gap_length: Option<f64>,
    rng: &mut impl Rng,
) -> Scene {
    let (a, b) = lattice_segment([size; 3], margin, false, rng);
    let steps = (0..3).map(|k| (b[k] - a[k]).abs()).max().unwrap_or(0);
    let d: Vec<i64> = (0..3).map(|k| (b[k] - a[k]).signum()).collect();
    let mid = [0, 1, 2].map(|k| a[k] + d[k] * (steps / 2));
    Scene {
        dims: [size; 3],
        d_max: DEFAULT_D_MAX,
        tubes: vec![Tube {
            points: vec![as_point(a), as_point(b)],
            radius: 2.0,
        }],
        corruptions: gap_length
            .map(|length| Corruption::Gap {
                center: as_point(mid),
                length,
            })
            .into_iter()
            .collect(),
    }
}

/// One tube along a random lattice direction whose every moving coordinate
/// runs from one face of a `size^3` volume to the opposite face, so each
/// non-degenerate projection of it crosses the whole map. Fixed coordinates
/// and the optional gap centre stay at least `margin` voxels from the faces.
pub fn spanning_tube_scene(
    size: usize,
    margin: usize,
    gap_length: Option<f64>,
    rng: &mut impl Rng,
) -> Scene {
    let dirs = lattice_directions(false);
    let d = dirs[rng.random_range(0..dirs.len())];
    let last = size as i64 - 1;
    let inner = margin as i64..(size - margin) as i64;
    let mut a = [0i64; 3];
    for k in 0..3 {
        a[k] = match d[k] {
            0 => rng.random_range(inner.clone()),
            1 => 0,
            _ => last,
        };
    }
    let b = [0, 1, 2].map(|k| a[k] + d[k] * last);
    let s = rng.random_range(inner);
    let mid = [0, 1, 2].map(|k| a[k] + d[k] * s);
    Scene {
        dims: [size; 3],
        d_max: DEFAULT_D_MAX,
        tubes: vec![Tube {
            points: vec![as_point(a), as_point(b)],
            radius: 2.0,
        }],
        corruptions: gap_length
            .map(|length| Corruption::Gap {
                center: as_point(mid),
                length,
            })
            .into_iter()
            .collect(),
    }
}
