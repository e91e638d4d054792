use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::volume::Grid2;

use super::RegionLabeling;

/// Aggregated pair counts whose maximin bottleneck is one pixel.
///
/// Pairs are unordered pairs of distinct background pixels.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MaximinEvent {
    /// Linear index `u + width * v` of the critical pixel.
    pub pixel: usize,
    pub value: f64,
    pub cross_pairs: u64,
    pub same_pairs: u64,
}

/// Union-find whose clusters carry per-region pixel counts.
struct RegionForest {
    parent: Vec<usize>,
    rank: Vec<u8>,
    /// Sorted `(region, count)` lists, valid at roots only.
    counts: Vec<Vec<(u32, u64)>>,
    totals: Vec<u64>,
}

impl RegionForest {
    fn new(labels: &[u32]) -> Self {
        let n = labels.len();
        RegionForest {
            parent: (0..n).collect(),
            rank: vec![0; n],
            counts: labels
                .iter()
                .map(|&l| if l > 0 { vec![(l, 1)] } else { Vec::new() })
                .collect(),
            totals: labels.iter().map(|&l| u64::from(l > 0)).collect(),
        }
    }

    fn find(&mut self, mut i: usize) -> usize {
        while self.parent[i] != i {
            self.parent[i] = self.parent[self.parent[i]];
            i = self.parent[i];
        }
        i
    }

    /// Merges two roots and returns `(cross_pairs, same_pairs)` created by the merge.
    fn union(&mut self, a: usize, b: usize) -> (u64, u64) {
        let (ca, cb) = (&self.counts[a], &self.counts[b]);
        let mut same = 0u64;
        let mut merged = Vec::with_capacity(ca.len() + cb.len());
        let (mut i, mut j) = (0, 0);
        while i < ca.len() && j < cb.len() {
            let (la, na) = ca[i];
            let (lb, nb) = cb[j];
            if la == lb {
                same += na * nb;
                merged.push((la, na + nb));
                i += 1;
                j += 1;
            } else if la < lb {
                merged.push(ca[i]);
                i += 1;
            } else {
                merged.push(cb[j]);
                j += 1;
            }
        }
        merged.extend_from_slice(&ca[i..]);
        merged.extend_from_slice(&cb[j..]);
        let cross = self.totals[a] * self.totals[b] - same;
        let total = self.totals[a] + self.totals[b];

        let (root, child) = if self.rank[a] >= self.rank[b] {
            (a, b)
        } else {
            (b, a)
        };
        if self.rank[a] == self.rank[b] {
            self.rank[root] += 1;
        }
        self.parent[child] = root;
        self.counts[root] = merged;
        self.counts[child] = Vec::new();
        self.totals[root] = total;
        (cross, same)
    }
}

/// Critical pixels of all background pixel pairs, found in one
/// maximum-spanning-tree pass over the 4-connected pixel graph.
///
/// An edge between 4-neighbours scores the smaller of the two pixel values;
/// its critical pixel is that smaller endpoint, or the lower linear index on
/// a tie. Edges are merged by descending score, equal scores in ascending
/// `(low index, high index)` order. Events are returned sorted by pixel.
pub fn maximin_events(pred2d: &Grid2, labeling: &RegionLabeling) -> Result<Vec<MaximinEvent>> {
    let (w, h) = pred2d.shape();
    if (labeling.width(), labeling.height()) != (w, h) {
        return Err(Error::shape(
            format!("{w}x{h}"),
            format!("{}x{}", labeling.width(), labeling.height()),
        ));
    }
    let vals = pred2d.values();

    let mut edges: Vec<(usize, usize)> = Vec::with_capacity(2 * w * h);
    for v in 0..h {
        for u in 0..w {
            let i = u + w * v;
            if u + 1 < w {
                edges.push((i, i + 1));
            }
            if v + 1 < h {
                edges.push((i, i + w));
            }
        }
    }
    let score = |&(a, b): &(usize, usize)| vals[a].min(vals[b]);
    edges.sort_by(|e, f| score(f).total_cmp(&score(e)).then(e.cmp(f)));

    let mut forest = RegionForest::new(labeling.labels());
    let mut acc: BTreeMap<usize, (u64, u64)> = BTreeMap::new();
    for (a, b) in edges {
        let (ra, rb) = (forest.find(a), forest.find(b));
        if ra == rb {
            continue;
        }
        let (cross, same) = forest.union(ra, rb);
        if cross + same == 0 {
            continue;
        }
        let critical = if vals[b] < vals[a] { b } else { a };
        let slot = acc.entry(critical).or_insert((0, 0));
        slot.0 += cross;
        slot.1 += same;
    }

    Ok(acc
        .into_iter()
        .map(|(pixel, (cross_pairs, same_pairs))| MaximinEvent {
            pixel,
            value: vals[pixel],
            cross_pairs,
            same_pairs,
        })
        .collect())
}
