use std::fmt::Write as _;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::volume::Grid2;

use super::{label_regions, maximin_events, tiles, MaximinEvent, TopoConfig};

/// Events of one window, with pixel indices local to the window.
#[derive(Clone, Debug, PartialEq)]
pub struct WindowReport {
    pub origin: (usize, usize),
    pub width: usize,
    pub region_count: usize,
    pub events: Vec<MaximinEvent>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TopoLossResult {
    pub l_conn: f64,
    pub l_disc: f64,
    /// `l_conn + beta * l_disc`.
    pub l_topo: f64,
    /// Gradient of `l_topo`; nonzero only at critical pixels.
    pub gradient: Grid2,
    pub windows: Vec<WindowReport>,
}

impl TopoLossResult {
    /// Largest bottleneck value over events joining different regions, i.e.
    /// the worst region-to-region maximin value. `None` without cross pairs.
    pub fn max_cross_bottleneck(&self) -> Option<f64> {
        self.windows
            .iter()
            .flat_map(|w| &w.events)
            .filter(|e| e.cross_pairs > 0)
            .map(|e| e.value)
            .reduce(f64::max)
    }
}

struct WindowOutcome {
    l_conn: f64,
    l_disc: f64,
    grad: Vec<(usize, f64)>,
    report: WindowReport,
}

fn check_map(name: &str, map: &Grid2) -> Result<()> {
    match map.values().iter().position(|v| !v.is_finite() || *v < 0.0) {
        Some(i) => Err(Error::Validation(format!(
            "{name} pixel ({}, {}) = {} is not a finite value >= 0",
            i % map.width(),
            i / map.width(),
            map.values()[i]
        ))),
        None => Ok(()),
    }
}

fn window_loss(
    pred: &Grid2,
    gt: &Grid2,
    origin: (usize, usize),
    size: (usize, usize),
    cfg: &TopoConfig,
) -> Result<WindowOutcome> {
    let (u0, v0) = origin;
    let pw = pred.crop(u0, v0, size.0, size.1);
    let gw = gt.crop(u0, v0, size.0, size.1);
    let labeling = label_regions(&gw, cfg);
    let events = maximin_events(&pw, &labeling)?;

    let cross_total: u64 = events.iter().map(|e| e.cross_pairs).sum();
    let same_total: u64 = events.iter().map(|e| e.same_pairs).sum();
    let weight = |count: u64, total: u64| {
        if cfg.normalize_pairs && total > 0 {
            count as f64 / total as f64
        } else {
            count as f64
        }
    };

    let mut l_conn = 0.0;
    let mut l_disc = 0.0;
    let mut grad = Vec::with_capacity(events.len());
    for e in &events {
        let p = pw.values()[e.pixel];
        let g = gw.values()[e.pixel];
        let wc = weight(e.cross_pairs, cross_total);
        let ws = weight(e.same_pairs, same_total);
        l_conn += wc * p * p;
        l_disc += ws * (p - g) * (p - g);
        let d = 2.0 * wc * p + 2.0 * cfg.beta * ws * (p - g);
        if d != 0.0 {
            let (lu, lv) = (e.pixel % size.0, e.pixel / size.0);
            grad.push((pred.index(u0 + lu, v0 + lv), d));
        }
    }

    Ok(WindowOutcome {
        l_conn,
        l_disc,
        grad,
        report: WindowReport {
            origin,
            width: size.0,
            region_count: labeling.region_count(),
            events,
        },
    })
}

/// Windowed connectivity loss of `pred2d` against `gt2d`.
///
/// Windows tile the map from the origin; the last row and column of windows
/// may be smaller than `cfg.window`. Window results are reduced in raster
/// order, so the output does not depend on the thread count.
pub fn topo_loss(pred2d: &Grid2, gt2d: &Grid2, cfg: &TopoConfig) -> Result<TopoLossResult> {
    cfg.validate()?;
    pred2d.ensure_same_shape(gt2d)?;
    check_map("prediction", pred2d)?;
    check_map("ground truth", gt2d)?;

    let (w, h) = pred2d.shape();
    let tiles = tiles(w, h, cfg.window);

    let outcomes: Vec<WindowOutcome> = tiles
        .par_iter()
        .map(|&(origin, size)| window_loss(pred2d, gt2d, origin, size, cfg))
        .collect::<Result<_>>()?;

    let mut gradient = Grid2::filled(w, h, 0.0);
    let mut l_conn = 0.0;
    let mut l_disc = 0.0;
    let mut windows = Vec::with_capacity(outcomes.len());
    for o in outcomes {
        l_conn += o.l_conn;
        l_disc += o.l_disc;
        for (i, d) in o.grad {
            gradient.values_mut()[i] += d;
        }
        windows.push(o.report);
    }

    Ok(TopoLossResult {
        l_conn,
        l_disc,
        l_topo: l_conn + cfg.beta * l_disc,
        gradient,
        windows,
    })
}

/// Debug dump: one CSV row per event, pixel coordinates in map space.
pub fn events_csv(result: &TopoLossResult) -> String {
    let mut out = String::from("window_x,window_y,qx,qy,value,cross_pairs,same_pairs\n");
    for win in &result.windows {
        let (u0, v0) = win.origin;
        for e in &win.events {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{}",
                u0,
                v0,
                u0 + e.pixel % win.width,
                v0 + e.pixel / win.width,
                e.value,
                e.cross_pairs,
                e.same_pairs
            );
        }
    }
    out
}
