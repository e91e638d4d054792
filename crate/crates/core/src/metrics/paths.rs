use std::collections::BTreeMap;

use petgraph::algo::dijkstra;
use petgraph::graph::{NodeIndex, UnGraph};
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::extract::SpatialGraph;

/// Which gt nodes may serve as path end points.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sampler {
    #[default]
    All,
    /// Degree-1 nodes only.
    Leaves,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricConfig {
    pub ccq_tolerance: f64,
    pub tlts_band: f64,
    pub apls_pairs: usize,
    pub snap_radius: f64,
    pub rng_seed: u64,
    #[serde(default)]
    pub sampler: Sampler,
}

impl Default for MetricConfig {
    fn default() -> Self {
        MetricConfig {
            ccq_tolerance: 3.0,
            tlts_band: 0.15,
            apls_pairs: 500,
            snap_radius: 5.0,
            rng_seed: 0,
            sampler: Sampler::All,
        }
    }
}

impl MetricConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.ccq_tolerance > 0.0 && self.ccq_tolerance.is_finite()) {
            return Err(Error::Config(format!(
                "ccq_tolerance must be > 0, got {}",
                self.ccq_tolerance
            )));
        }
        if !(self.tlts_band > 0.0 && self.tlts_band < 1.0) {
            return Err(Error::Config(format!(
                "tlts_band must be in (0, 1), got {}",
                self.tlts_band
            )));
        }
        if self.apls_pairs < 1 {
            return Err(Error::Config("apls_pairs must be >= 1".into()));
        }
        if !(self.snap_radius >= 0.0 && self.snap_radius.is_finite()) {
            return Err(Error::Config(format!(
                "snap_radius must be >= 0, got {}",
                self.snap_radius
            )));
        }
        Ok(())
    }
}

/// One sampled gt pair with its gt and (if any) pred shortest-path length.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PathPair {
    pub a: usize,
    pub b: usize,
    pub gt_length: f64,
    pub pred_length: Option<f64>,
}

impl PathPair {
    /// `min(1, |L_gt - L_pred| / L_gt)`, 1 when the pred path is missing.
    pub fn apls_score(&self) -> f64 {
        match self.pred_length {
            None => 1.0,
            Some(lp) if self.gt_length > 0.0 => {
                ((self.gt_length - lp).abs() / self.gt_length).min(1.0)
            }
            Some(0.0) => 0.0,
            Some(_) => 1.0,
        }
    }

    pub fn within_band(&self, band: f64) -> bool {
        self.pred_length
            .is_some_and(|lp| (lp - self.gt_length).abs() < band * self.gt_length)
    }
}

fn petgraph_of(g: &SpatialGraph) -> UnGraph<(), f64> {
    let mut pg = UnGraph::with_capacity(g.nodes.len(), g.edges.len());
    for _ in &g.nodes {
        pg.add_node(());
    }
    for e in &g.edges {
        pg.add_edge(NodeIndex::new(e.a), NodeIndex::new(e.b), e.length);
    }
    pg
}

fn shortest_from(pg: &UnGraph<(), f64>, source: usize) -> BTreeMap<usize, f64> {
    dijkstra(pg, NodeIndex::new(source), None, |e| *e.weight())
        .into_iter()
        .map(|(n, d)| (n.index(), d))
        .collect()
}

/// Unordered pairs of connected candidate gt nodes, in lexicographic order,
/// subsampled without replacement to at most `apls_pairs` with a seeded RNG.
pub fn sample_pairs(gt: &SpatialGraph, cfg: &MetricConfig) -> Result<Vec<(usize, usize)>> {
    cfg.validate()?;
    if gt.nodes.len() < 2 {
        return Err(Error::Validation(format!(
            "ground-truth graph needs at least 2 nodes, has {}",
            gt.nodes.len()
        )));
    }
    let candidates: Vec<usize> = match cfg.sampler {
        Sampler::All => (0..gt.nodes.len()).collect(),
        Sampler::Leaves => (0..gt.nodes.len()).filter(|&n| gt.degree(n) == 1).collect(),
    };
    let comp = gt.components();
    let mut pairs = Vec::new();
    for (k, &a) in candidates.iter().enumerate() {
        for &b in &candidates[k + 1..] {
            if comp[a] == comp[b] {
                pairs.push((a, b));
            }
        }
    }
    if pairs.is_empty() {
        return Err(Error::Validation(
            "ground-truth graph has no connected pair of end points".into(),
        ));
    }
    if pairs.len() <= cfg.apls_pairs {
        return Ok(pairs);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    let mut picked = sample(&mut rng, pairs.len(), cfg.apls_pairs).into_vec();
    picked.sort_unstable();
    Ok(picked.into_iter().map(|i| pairs[i]).collect())
}

/// Nearest pred node within `radius` (inclusive); ties go to the lower id.
pub fn snap(pos: [i64; 3], pred: &SpatialGraph, radius: f64) -> Option<usize> {
    let r2 = radius * radius;
    pred.nodes
        .iter()
        .map(|n| {
            let d2: i64 = (0..3).map(|k| (n.pos[k] - pos[k]).pow(2)).sum();
            (d2, n.id)
        })
        .filter(|&(d2, _)| d2 as f64 <= r2)
        .min()
        .map(|(_, id)| id)
}

/// Sampled gt pairs with gt and pred path lengths, in sampled order.
pub fn compare_paths(
    pred: &SpatialGraph,
    gt: &SpatialGraph,
    cfg: &MetricConfig,
) -> Result<Vec<PathPair>> {
    let pairs = sample_pairs(gt, cfg)?;
    let gpg = petgraph_of(gt);
    let ppg = petgraph_of(pred);

    let mut gt_sources: Vec<usize> = pairs.iter().map(|p| p.0).collect();
    gt_sources.dedup();
    let gt_dist: BTreeMap<usize, BTreeMap<usize, f64>> = gt_sources
        .par_iter()
        .map(|&s| (s, shortest_from(&gpg, s)))
        .collect();

    let snapped: Vec<Option<usize>> = gt
        .nodes
        .iter()
        .map(|n| snap(n.pos, pred, cfg.snap_radius))
        .collect();
    let mut pred_sources: Vec<usize> = pairs.iter().filter_map(|p| snapped[p.0]).collect();
    pred_sources.sort_unstable();
    pred_sources.dedup();
    let pred_dist: BTreeMap<usize, BTreeMap<usize, f64>> = pred_sources
        .par_iter()
        .map(|&s| (s, shortest_from(&ppg, s)))
        .collect();

    Ok(pairs
        .par_iter()
        .map(|&(a, b)| {
            let gt_length = gt_dist[&a][&b];
            let pred_length = match (snapped[a], snapped[b]) {
                (Some(pa), Some(pb)) => pred_dist[&pa].get(&pb).copied(),
                _ => None,
            };
            PathPair {
                a,
                b,
                gt_length,
                pred_length,
            }
        })
        .collect())
}

/// `1 - mean(min(1, |L_gt - L_pred| / L_gt))` over sampled pairs.
pub fn apls(pred: &SpatialGraph, gt: &SpatialGraph, cfg: &MetricConfig) -> Result<f64> {
    Ok(apls_from(&compare_paths(pred, gt, cfg)?))
}

pub fn apls_from(pairs: &[PathPair]) -> f64 {
    let sum: f64 = pairs.iter().map(PathPair::apls_score).sum();
    1.0 - sum / pairs.len() as f64
}

/// Fraction of sampled pairs whose pred path length is within the band.
pub fn tlts(pred: &SpatialGraph, gt: &SpatialGraph, cfg: &MetricConfig) -> Result<f64> {
    Ok(tlts_from(&compare_paths(pred, gt, cfg)?, cfg.tlts_band))
}

pub fn tlts_from(pairs: &[PathPair], band: f64) -> f64 {
    let ok = pairs.iter().filter(|p| p.within_band(band)).count();
    ok as f64 / pairs.len() as f64
}
