//! Direct gradient descent on voxel values.

use std::fmt::Write as _;

use crate::composite::{
    loss_2d, loss_3d_masked, AxisTargets, CompositeConfig, LossMode, LossReport, LossSummary,
};
use crate::error::{Error, Result};
use crate::volume::{Axis, DistanceVolume};

/// What the optimizer is supervised with.
#[derive(Clone, Debug)]
pub enum Targets {
    /// 3D ground truth; voxels with `supervised[i] == false` are left out of the MSE.
    Volume {
        gt: DistanceVolume,
        supervised: Option<Vec<bool>>,
    },
    /// One 2D ground truth per axis.
    Projections(AxisTargets),
}

impl Targets {
    pub fn volume(gt: DistanceVolume) -> Self {
        Targets::Volume {
            gt,
            supervised: None,
        }
    }

    pub fn evaluate(&self, pred: &DistanceVolume, cfg: &CompositeConfig) -> Result<LossReport> {
        match self {
            Targets::Volume { gt, supervised } => {
                loss_3d_masked(pred, gt, supervised.as_deref(), cfg)
            }
            Targets::Projections(t) => loss_2d(pred, t, cfg),
        }
    }

    fn mode(&self) -> LossMode {
        match self {
            Targets::Volume { .. } => LossMode::Loss3d,
            Targets::Projections(_) => LossMode::Loss2d,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct OptimizeConfig {
    pub steps: usize,
    pub rate: f64,
    /// Iterates are clamped to `[0, d_max]` after every step.
    pub d_max: f64,
}

#[derive(Clone, Debug)]
pub struct Trajectory {
    /// `steps + 1` entries: the loss before each update, then the loss of the final volume.
    pub records: Vec<LossSummary>,
    pub volume: DistanceVolume,
}

pub fn optimize(
    pred0: &DistanceVolume,
    targets: &Targets,
    cfg: &CompositeConfig,
    opt: &OptimizeConfig,
) -> Result<Trajectory> {
    if !(opt.rate > 0.0 && opt.rate.is_finite()) {
        return Err(Error::Config(format!("rate must be > 0, got {}", opt.rate)));
    }
    if opt.steps < 1 {
        return Err(Error::Config("steps must be >= 1".into()));
    }
    if opt.d_max.is_nan() || opt.d_max <= 0.0 {
        return Err(Error::Config(format!(
            "d_max must be > 0, got {}",
            opt.d_max
        )));
    }
    if cfg.mode != targets.mode() {
        return Err(Error::Config(format!(
            "targets need {:?} mode, configuration is {:?}",
            targets.mode(),
            cfg.mode
        )));
    }

    let mut vol = pred0.clone();
    let mut records = Vec::with_capacity(opt.steps + 1);
    for step in 0..=opt.steps {
        let report = targets.evaluate(&vol, cfg)?;
        if !report.total().is_finite() || report.gradient.iter().any(|g| !g.is_finite()) {
            return Err(Error::NonFinite { step });
        }
        records.push(report.summary);
        if step == opt.steps {
            break;
        }
        for (v, g) in vol.values_mut().iter_mut().zip(&report.gradient) {
            *v = (*v - opt.rate * g).clamp(0.0, opt.d_max);
        }
    }
    Ok(Trajectory {
        records,
        volume: vol,
    })
}

/// Per-step CSV: `step,total,mse,x_l_conn,x_l_disc,y_l_conn,y_l_disc,z_l_conn,z_l_disc`.
/// Axes that were not evaluated are left empty.
pub fn trajectory_csv(records: &[LossSummary]) -> String {
    let mut out =
        String::from("step,total,mse,x_l_conn,x_l_disc,y_l_conn,y_l_disc,z_l_conn,z_l_disc\n");
    for (step, r) in records.iter().enumerate() {
        let _ = write!(out, "{},{},{}", step, r.total, r.mse);
        for axis in Axis::ALL {
            match r.axes.get(&axis) {
                Some(t) => {
                    let _ = write!(out, ",{},{}", t.l_conn, t.l_disc);
                }
                None => out.push_str(",,"),
            }
        }
        out.push('\n');
    }
    out
}
