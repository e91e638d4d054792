//! Post-processing of predicted distance maps into graphs, and the
//! centerline (CCQ) and path-based (APLS, TLTS) scores.

mod ccq;
mod extract;
mod paths;
mod skeleton;

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::volume::DistanceVolume;

pub use ccq::{ccq, matched_count, CcqScores};
pub use extract::{
    extract_graph, graph_from_skeleton, ExtractionConfig, Provenance, SpatialEdge, SpatialGraph,
    SpatialNode,
};
pub use paths::{
    apls, apls_from, compare_paths, sample_pairs, snap, tlts, tlts_from, MetricConfig, PathPair,
    Sampler,
};
pub use skeleton::{count_components, label_components, neighbours26, skeletonize};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub correctness: f64,
    pub completeness: f64,
    pub quality: f64,
    pub apls: f64,
    pub tlts: f64,
}

impl MetricsReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("metric,value\n");
        for (name, v) in [
            ("correctness", self.correctness),
            ("completeness", self.completeness),
            ("quality", self.quality),
            ("apls", self.apls),
            ("tlts", self.tlts),
        ] {
            let _ = writeln!(out, "{name},{v}");
        }
        out
    }
}

/// Skeleton voxel coordinates of a graph extracted from `vol`.
pub fn voxel_coords(g: &SpatialGraph, vol: &DistanceVolume) -> Vec<[i64; 3]> {
    let dims = vol.dims();
    g.voxels
        .iter()
        .map(|&i| dims.coords(i).map(|c| c as i64))
        .collect()
}

/// Scores two extracted graphs; CCQ runs on their skeleton voxels.
pub fn score_graphs(
    pred: &SpatialGraph,
    gt: &SpatialGraph,
    pred_voxels: &[[i64; 3]],
    gt_voxels: &[[i64; 3]],
    cfg: &MetricConfig,
) -> Result<MetricsReport> {
    cfg.validate()?;
    let c = ccq(pred_voxels, gt_voxels, cfg.ccq_tolerance);
    let pairs = compare_paths(pred, gt, cfg)?;
    Ok(MetricsReport {
        correctness: c.correctness,
        completeness: c.completeness,
        quality: c.quality,
        apls: apls_from(&pairs),
        tlts: tlts_from(&pairs, cfg.tlts_band),
    })
}

/// Full pipeline: both volumes are thresholded, skeletonized and converted
/// to graphs with the same settings, then scored.
pub fn evaluate(
    pred: &DistanceVolume,
    gt: &DistanceVolume,
    extraction: &ExtractionConfig,
    cfg: &MetricConfig,
) -> Result<MetricsReport> {
    pred.ensure_same_shape(gt)?;
    let (pg, gg) = rayon::join(
        || extract_graph(pred, extraction),
        || extract_graph(gt, extraction),
    );
    let (pg, gg) = (pg?, gg?);
    score_graphs(
        &pg,
        &gg,
        &voxel_coords(&pg, pred),
        &voxel_coords(&gg, gt),
        cfg,
    )
}
