//! Connectivity loss on a single 2D distance map.
//!
//! The map is cut into square windows. In each window the annotation
//! (ground-truth pixels below [`ANNOTATION_LEVEL`]) is dilated and the rest
//! of the window falls apart into 4-connected background regions. For every
//! pair of background pixels, the maximin path through the predicted map
//! bottlenecks at one critical pixel. Pairs from different regions push that
//! pixel towards zero; pairs from the same region pull it towards its
//! ground-truth value.

mod loss;
mod maximin;
mod regions;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use loss::{events_csv, topo_loss, TopoLossResult, WindowReport};
pub use maximin::{maximin_events, MaximinEvent};
pub use regions::{label_regions, zero_separated, RegionLabeling, ANNOTATION_LEVEL};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TopoConfig {
    /// Window edge length in pixels.
    pub window: usize,
    /// Disc radius used to dilate the annotation.
    pub dilation_radius: usize,
    /// Weight of the same-region (false connection) term.
    pub beta: f64,
    /// Divide each window's cross (same) sums by its total cross (same) pair count.
    pub normalize_pairs: bool,
}

impl Default for TopoConfig {
    fn default() -> Self {
        TopoConfig {
            window: 48,
            dilation_radius: 3,
            beta: 0.1,
            normalize_pairs: true,
        }
    }
}

impl TopoConfig {
    pub fn validate(&self) -> Result<()> {
        if self.window < 8 {
            return Err(Error::Config(format!(
                "window must be >= 8, got {}",
                self.window
            )));
        }
        if self.dilation_radius < 1 {
            return Err(Error::Config("dilation_radius must be >= 1".into()));
        }
        if !(self.beta >= 0.0 && self.beta.is_finite()) {
            return Err(Error::Config(format!(
                "beta must be >= 0, got {}",
                self.beta
            )));
        }
        Ok(())
    }
}

/// Window origins and sizes tiling a `w x h` map in raster order.
pub(crate) fn tiles(w: usize, h: usize, window: usize) -> Vec<((usize, usize), (usize, usize))> {
    let mut out = Vec::new();
    for v0 in (0..h).step_by(window) {
        for u0 in (0..w).step_by(window) {
            out.push(((u0, v0), (window.min(w - u0), window.min(h - v0))));
        }
    }
    out
}
