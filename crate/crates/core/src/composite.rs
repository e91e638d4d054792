//! Volume losses built from projected connectivity terms.
//!
//! `loss-3d` pairs a voxel-wise MSE against a 3D ground truth with the
//! connectivity loss on the three minimum-intensity projections of both
//! volumes. `loss-2d` only needs one 2D ground-truth map per axis: the MSE
//! and the connectivity loss are both evaluated on the projections.
//!
//! Gradients of projected terms flow back through the projection argmin, so
//! each 2D gradient entry lands on exactly one voxel.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::topo::{topo_loss, TopoConfig, TopoLossResult};
use crate::volume::{min_projection, Axis, Dims, DistanceVolume, Grid2, ProjectedMap};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum LossMode {
    #[serde(rename = "loss-3d")]
    Loss3d,
    #[serde(rename = "loss-2d")]
    Loss2d,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompositeConfig {
    pub alpha: f64,
    pub axes: Vec<Axis>,
    pub mode: LossMode,
    pub topo: TopoConfig,
}

impl Default for CompositeConfig {
    fn default() -> Self {
        CompositeConfig {
            alpha: 1e-3,
            axes: Axis::ALL.to_vec(),
            mode: LossMode::Loss3d,
            topo: TopoConfig::default(),
        }
    }
}

impl CompositeConfig {
    pub fn with_mode(mode: LossMode) -> Self {
        CompositeConfig {
            mode,
            ..CompositeConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.axes.is_empty() {
            return Err(Error::Config(
                "at least one projection axis is required".into(),
            ));
        }
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return Err(Error::Config(format!(
                "alpha must be >= 0, got {}",
                self.alpha
            )));
        }
        self.topo.validate()
    }

    /// Selected axes in x, y, z order without repeats.
    pub fn canonical_axes(&self) -> Vec<Axis> {
        Axis::ALL
            .into_iter()
            .filter(|a| self.axes.contains(a))
            .collect()
    }

    fn require_mode(&self, mode: LossMode) -> Result<()> {
        if self.mode != mode {
            return Err(Error::Config(format!(
                "configuration is in {:?} mode, operation needs {:?}",
                self.mode, mode
            )));
        }
        Ok(())
    }
}

/// One 2D ground-truth map per axis, shaped like the projection along that axis.
#[derive(Clone, Debug, PartialEq)]
pub struct AxisTargets {
    pub x: Grid2,
    pub y: Grid2,
    pub z: Grid2,
}

impl AxisTargets {
    pub fn get(&self, axis: Axis) -> &Grid2 {
        match axis {
            Axis::X => &self.x,
            Axis::Y => &self.y,
            Axis::Z => &self.z,
        }
    }

    /// Projections of a 3D volume along all axes.
    pub fn project(vol: &DistanceVolume) -> Self {
        AxisTargets {
            x: min_projection(vol, Axis::X).values,
            y: min_projection(vol, Axis::Y).values,
            z: min_projection(vol, Axis::Z).values,
        }
    }

    fn check(&self, dims: Dims) -> Result<()> {
        for axis in Axis::ALL {
            let (w, h) = dims.projected(axis);
            let g = self.get(axis);
            if g.shape() != (w, h) {
                return Err(Error::shape(
                    format!("{w}x{h} ground truth for axis {axis}"),
                    format!("{}x{}", g.width(), g.height()),
                ));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct AxisTerms {
    pub l_conn: f64,
    pub l_disc: f64,
}

/// Scalar part of a [`LossReport`]; this is what gets written as JSON.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossSummary {
    pub total: f64,
    pub mse: f64,
    pub axes: BTreeMap<Axis, AxisTerms>,
    pub alpha: f64,
    pub beta: f64,
}

impl LossSummary {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("loss summary serializes")
    }

    /// Sum of `l_conn + beta * l_disc` over the reported axes.
    pub fn topo_sum(&self) -> f64 {
        self.axes
            .values()
            .map(|t| t.l_conn + self.beta * t.l_disc)
            .sum()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LossReport {
    pub summary: LossSummary,
    pub dims: Dims,
    /// Gradient of `summary.total` with respect to every voxel.
    pub gradient: Vec<f64>,
}

impl LossReport {
    pub fn total(&self) -> f64 {
        self.summary.total
    }
}

/// Per-axis connectivity losses plus their gradient routed to the volume.
#[derive(Clone, Debug)]
pub struct ConnLoss {
    pub per_axis: Vec<(Axis, TopoLossResult)>,
    pub projections: Vec<ProjectedMap>,
    /// Unweighted (alpha = 1) gradient of the summed `l_topo` terms.
    pub gradient: Vec<f64>,
}

impl ConnLoss {
    pub fn terms(&self) -> BTreeMap<Axis, AxisTerms> {
        self.per_axis
            .iter()
            .map(|(a, r)| {
                (
                    *a,
                    AxisTerms {
                        l_conn: r.l_conn,
                        l_disc: r.l_disc,
                    },
                )
            })
            .collect()
    }

    pub fn topo_sum(&self) -> f64 {
        self.per_axis.iter().map(|(_, r)| r.l_topo).sum()
    }

    /// Largest cross-region bottleneck over all axes.
    pub fn max_cross_bottleneck(&self) -> Option<f64> {
        self.per_axis
            .iter()
            .filter_map(|(_, r)| r.max_cross_bottleneck())
            .reduce(f64::max)
    }
}

fn projected_conn(
    pred: &DistanceVolume,
    targets: &(dyn Fn(Axis) -> Grid2 + Sync),
    cfg: &CompositeConfig,
) -> Result<ConnLoss> {
    let dims = pred.dims();
    let axes = cfg.canonical_axes();
    let results: Vec<(ProjectedMap, TopoLossResult)> = axes
        .par_iter()
        .map(|&axis| {
            let proj = min_projection(pred, axis);
            let gt2d = targets(axis);
            let r = topo_loss(&proj.values, &gt2d, &cfg.topo)?;
            Ok((proj, r))
        })
        .collect::<Result<_>>()?;

    let mut gradient = vec![0.0; dims.len()];
    let mut per_axis = Vec::with_capacity(results.len());
    let mut projections = Vec::with_capacity(results.len());
    for (axis, (proj, r)) in axes.into_iter().zip(results) {
        for (i, &g) in r.gradient.values().iter().enumerate() {
            if g != 0.0 {
                gradient[proj.source_voxel(dims, i)] += g;
            }
        }
        per_axis.push((axis, r));
        projections.push(proj);
    }
    Ok(ConnLoss {
        per_axis,
        projections,
        gradient,
    })
}

/// Connectivity loss of `pred` against the projections of a 3D ground truth.
pub fn conn_loss(
    pred: &DistanceVolume,
    gt: &DistanceVolume,
    cfg: &CompositeConfig,
) -> Result<ConnLoss> {
    cfg.validate()?;
    pred.ensure_same_shape(gt)?;
    projected_conn(pred, &|axis| min_projection(gt, axis).values, cfg)
}

pub fn loss_3d(
    pred: &DistanceVolume,
    gt: &DistanceVolume,
    cfg: &CompositeConfig,
) -> Result<LossReport> {
    loss_3d_masked(pred, gt, None, cfg)
}

/// `loss_3d` with the MSE restricted to voxels where `supervised` is true.
/// The connectivity term always uses the full ground truth.
pub fn loss_3d_masked(
    pred: &DistanceVolume,
    gt: &DistanceVolume,
    supervised: Option<&[bool]>,
    cfg: &CompositeConfig,
) -> Result<LossReport> {
    cfg.require_mode(LossMode::Loss3d)?;
    pred.ensure_same_shape(gt)?;
    let n = pred.values().len();
    if let Some(mask) = supervised {
        if mask.len() != n {
            return Err(Error::shape(n, mask.len()));
        }
    }
    let conn = conn_loss(pred, gt, cfg)?;

    let keep = |i: usize| supervised.is_none_or(|m| m[i]);
    let count = (0..n).filter(|&i| keep(i)).count();
    let mut sq = 0.0;
    let mut gradient = conn.gradient;
    for g in gradient.iter_mut() {
        *g *= cfg.alpha;
    }
    if count > 0 {
        let scale = 2.0 / count as f64;
        for (i, (&p, &t)) in pred.values().iter().zip(gt.values()).enumerate() {
            if keep(i) {
                let d = p - t;
                sq += d * d;
                gradient[i] += scale * d;
            }
        }
    }
    let mse = if count > 0 { sq / count as f64 } else { 0.0 };
    Ok(assemble(mse, &conn.per_axis, pred.dims(), gradient, cfg))
}

pub fn loss_2d(
    pred: &DistanceVolume,
    targets: &AxisTargets,
    cfg: &CompositeConfig,
) -> Result<LossReport> {
    cfg.require_mode(LossMode::Loss2d)?;
    cfg.validate()?;
    let dims = pred.dims();
    targets.check(dims)?;
    let conn = projected_conn(pred, &|axis| targets.get(axis).clone(), cfg)?;

    let mut gradient = conn.gradient;
    for g in gradient.iter_mut() {
        *g *= cfg.alpha;
    }
    let mut mse = 0.0;
    for proj in &conn.projections {
        let gt2d = targets.get(proj.axis);
        let n = proj.values.len() as f64;
        let mut sq = 0.0;
        for (i, (&p, &t)) in proj.values.values().iter().zip(gt2d.values()).enumerate() {
            let d = p - t;
            sq += d * d;
            gradient[proj.source_voxel(dims, i)] += 2.0 * d / n;
        }
        mse += sq / n;
    }
    Ok(assemble(mse, &conn.per_axis, dims, gradient, cfg))
}

fn assemble(
    mse: f64,
    per_axis: &[(Axis, TopoLossResult)],
    dims: Dims,
    gradient: Vec<f64>,
    cfg: &CompositeConfig,
) -> LossReport {
    let topo: f64 = per_axis.iter().map(|(_, r)| r.l_topo).sum();
    let axes = per_axis
        .iter()
        .map(|(a, r)| {
            (
                *a,
                AxisTerms {
                    l_conn: r.l_conn,
                    l_disc: r.l_disc,
                },
            )
        })
        .collect();
    LossReport {
        summary: LossSummary {
            total: mse + cfg.alpha * topo,
            mse,
            axes,
            alpha: cfg.alpha,
            beta: cfg.topo.beta,
        },
        dims,
        gradient,
    }
}
