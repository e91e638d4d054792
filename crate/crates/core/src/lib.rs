//! Connectivity-aware losses for curvilinear structure delineation from
//! distance maps, computed on minimum-intensity projections of 3D volumes,
//! plus the graph extraction and topology metrics used to score results.
//!
//! Volumes store values x-fastest (`x + X * (y + Y * z)`); 2D maps store
//! values u-fastest. All values are finite and non-negative.

pub mod composite;
pub mod distance;
mod error;
pub mod gradcheck;
pub mod graph;
pub mod io;
pub mod metrics;
pub mod optimize;
pub mod swc;
pub mod synth;
pub mod topo;
pub mod volume;

pub use composite::{
    conn_loss, loss_2d, loss_3d, loss_3d_masked, AxisTargets, AxisTerms, CompositeConfig, ConnLoss,
    LossMode, LossReport, LossSummary,
};
pub use distance::{gen_distance_map, gen_distance_map_2d, GenConfig, DEFAULT_D_MAX};
pub use error::{Error, Result};
pub use graph::{AnnotationGraph, Dimensionality, Node};
pub use optimize::{optimize, OptimizeConfig, Targets, Trajectory};
pub use topo::{topo_loss, TopoConfig, TopoLossResult};
pub use volume::{min_projection, Axis, Dims, DistanceVolume, Grid2, ProjectedMap, VolumeKind};
