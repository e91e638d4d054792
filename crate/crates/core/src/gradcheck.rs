//! Central finite-difference check of the composite loss gradients.
//!
//! Instances are drawn in general position: every voxel value sits at least
//! `4 * step` away from every other value, so a `±step` probe never changes a
//! projection argmin or the merge order of the spanning-tree pass.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::composite::{AxisTargets, CompositeConfig, LossMode};
use crate::distance::{gen_distance_map, gen_distance_map_2d, GenConfig};
use crate::error::{Error, Result};
use crate::graph::{AnnotationGraph, Node};
use crate::optimize::Targets;
use crate::synth::lattice_segment;
use crate::volume::{min_projection, Axis, Dims, DistanceVolume, VolumeKind};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GradcheckConfig {
    pub size: usize,
    pub seed: u64,
    pub mode: LossMode,
    pub samples: usize,
    pub step: f64,
    pub tolerance: f64,
    /// Test hook: perturb the analytic gradient so the check must fail.
    pub corrupt: bool,
}

impl GradcheckConfig {
    pub fn new(size: usize, seed: u64, mode: LossMode) -> Self {
        GradcheckConfig {
            size,
            seed,
            mode,
            samples: 100,
            step: 1e-3,
            tolerance: 1e-3,
            corrupt: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GradcheckReport {
    pub mode: LossMode,
    pub size: usize,
    pub seed: u64,
    pub samples: usize,
    pub step: f64,
    pub tolerance: f64,
    pub max_rel_error: f64,
    pub worst_voxel: [usize; 3],
    pub passed: bool,
}

/// `|a - b| / max(|a|, |b|, 1e-8)`.
pub fn relative_error(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-8)
}

/// Spreads `values` onto distinct slots `spacing` apart (preserving order),
/// then jitters each by less than a tenth of the spacing.
pub fn general_position(values: &[f64], spacing: f64, rng: &mut impl Rng) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)));
    let mut out = vec![0.0; values.len()];
    let mut last: i64 = 0;
    for (k, &i) in order.iter().enumerate() {
        let want = (values[i] / spacing).round().max(1.0) as i64;
        let slot = if k == 0 { want } else { want.max(last + 1) };
        last = slot;
        let jitter = rng.random_range(-0.1..0.1) * spacing;
        out[i] = slot as f64 * spacing + jitter;
    }
    out
}

fn lattice_line(extent: [usize; 3], flat: bool, rng: &mut impl Rng) -> ([f64; 3], [f64; 3]) {
    let (a, b) = lattice_segment(extent, 1, flat, rng);
    (a.map(|c| c as f64), b.map(|c| c as f64))
}

fn line_graph(a: [f64; 3], b: [f64; 3], dims: Dims) -> Result<AnnotationGraph> {
    AnnotationGraph::new(
        vec![Node { id: 1, pos: a }, Node { id: 2, pos: b }],
        vec![(1, 2)],
        dims,
    )
}

/// A random prediction in general position together with matching targets.
pub fn random_instance(
    size: usize,
    seed: u64,
    mode: LossMode,
) -> Result<(DistanceVolume, Targets)> {
    if size < 4 {
        return Err(Error::Config(format!(
            "gradcheck size must be >= 4, got {size}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dims = Dims::cube(size)?;
    let gen = GenConfig::default();

    let (a, b) = lattice_line(dims.as_array(), false, &mut rng);
    let gt = gen_distance_map(&line_graph(a, b, dims)?, dims, &gen)?;

    let noise = Normal::new(0.0, 1.5).expect("valid sigma");
    let rough: Vec<f64> = gt
        .values()
        .iter()
        .map(|v| (v + noise.sample(&mut rng)).max(0.05))
        .collect();
    let values = general_position(&rough, 5e-3, &mut rng);
    let pred = DistanceVolume::from_values(dims, values, VolumeKind::Predicted)?;

    let targets = match mode {
        LossMode::Loss3d => Targets::volume(gt),
        LossMode::Loss2d => {
            let mut maps = Vec::with_capacity(3);
            for axis in Axis::ALL {
                let (w, h) = dims.projected(axis);
                let plane = Dims::new(w, h, 1)?;
                let (a, b) = lattice_line([w, h, 1], true, &mut rng);
                maps.push(gen_distance_map_2d(&line_graph(a, b, plane)?, w, h, &gen)?);
            }
            let z = maps.pop().expect("three maps");
            let y = maps.pop().expect("three maps");
            let x = maps.pop().expect("three maps");
            Targets::Projections(AxisTargets { x, y, z })
        }
    };
    Ok((pred, targets))
}

/// Central difference of the total loss at one voxel.
pub fn finite_difference(
    pred: &DistanceVolume,
    targets: &Targets,
    cfg: &CompositeConfig,
    voxel: usize,
    step: f64,
) -> Result<f64> {
    let mut probe = pred.clone();
    let base = probe.values()[voxel];
    probe.values_mut()[voxel] = base + step;
    let up = targets.evaluate(&probe, cfg)?.total();
    probe.values_mut()[voxel] = base - step;
    let down = targets.evaluate(&probe, cfg)?.total();
    Ok((up - down) / (2.0 * step))
}

/// Voxels to probe: half drawn from projection argmins (where connectivity
/// gradients land), the rest uniformly. Sorted.
pub fn sample_voxels(pred: &DistanceVolume, count: usize, rng: &mut impl Rng) -> Vec<usize> {
    let n = pred.values().len();
    let count = count.min(n);
    let mut hits: Vec<usize> = Axis::ALL
        .iter()
        .flat_map(|&axis| {
            let p = min_projection(pred, axis);
            (0..p.argmin.len())
                .map(|i| p.source_voxel(pred.dims(), i))
                .collect::<Vec<_>>()
        })
        .collect();
    hits.sort_unstable();
    hits.dedup();

    let from_hits = (count / 2).min(hits.len());
    let mut chosen: Vec<usize> = sample(rng, hits.len(), from_hits)
        .into_iter()
        .map(|k| hits[k])
        .collect();
    let mut taken = vec![false; n];
    for &v in &chosen {
        taken[v] = true;
    }
    let rest: Vec<usize> = (0..n).filter(|&i| !taken[i]).collect();
    chosen.extend(
        sample(rng, rest.len(), count - from_hits)
            .into_iter()
            .map(|k| rest[k]),
    );
    chosen.sort_unstable();
    chosen
}

pub fn run_gradcheck(check: &GradcheckConfig) -> Result<GradcheckReport> {
    let (pred, targets) = random_instance(check.size, check.seed, check.mode)?;
    let cfg = CompositeConfig::with_mode(check.mode);
    let report = targets.evaluate(&pred, &cfg)?;
    let mut analytic = report.gradient;

    let mut rng = ChaCha8Rng::seed_from_u64(check.seed ^ 0x9e37_79b9_7f4a_7c15);
    let voxels = sample_voxels(&pred, check.samples, &mut rng);
    if check.corrupt {
        if let Some(&v) = voxels.first() {
            analytic[v] += 1.0;
        }
    }

    let mut worst = (0.0f64, 0usize);
    for &v in &voxels {
        let fd = finite_difference(&pred, &targets, &cfg, v, check.step)?;
        let err = relative_error(analytic[v], fd);
        if err > worst.0 {
            worst = (err, v);
        }
    }
    Ok(GradcheckReport {
        mode: check.mode,
        size: check.size,
        seed: check.seed,
        samples: voxels.len(),
        step: check.step,
        tolerance: check.tolerance,
        max_rel_error: worst.0,
        worst_voxel: pred.dims().coords(worst.1),
        passed: worst.0 < check.tolerance,
    })
}
