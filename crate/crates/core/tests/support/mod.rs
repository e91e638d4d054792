//! Independent oracles and fixture builders shared by integration tests.
#![allow(dead_code)]

use std::collections::BTreeMap;

use projconn::metrics::CcqScores;
use projconn::synth::{random_tube_scene, spanning_tube_scene, synth_volume, Scene, SynthOutput};
use projconn::topo::{zero_separated, MaximinEvent, RegionLabeling};
use projconn::{min_projection, Axis, DistanceVolume, Grid2, TopoConfig};
use rand::seq::SliceRandom;
use rand::Rng;

/// Best bottleneck from `src` to every pixel, by depth-first enumeration of
/// simple 4-connected paths. A branch is dropped once its running minimum
/// cannot beat the best value already recorded at its head.
fn bottlenecks_from(values: &[f64], w: usize, h: usize, src: usize) -> Vec<f64> {
    let mut best = vec![f64::NEG_INFINITY; w * h];
    let mut on_path = vec![false; w * h];
    fn walk(
        values: &[f64],
        w: usize,
        h: usize,
        at: usize,
        running: f64,
        best: &mut [f64],
        on_path: &mut [bool],
    ) {
        let m = running.min(values[at]);
        if m <= best[at] {
            return;
        }
        best[at] = m;
        on_path[at] = true;
        let (u, v) = (at % w, at / w);
        let mut next = Vec::with_capacity(4);
        if u > 0 {
            next.push(at - 1);
        }
        if u + 1 < w {
            next.push(at + 1);
        }
        if v > 0 {
            next.push(at - w);
        }
        if v + 1 < h {
            next.push(at + w);
        }
        for n in next {
            if !on_path[n] {
                walk(values, w, h, n, m, best, on_path);
            }
        }
        on_path[at] = false;
    }
    walk(values, w, h, src, f64::INFINITY, &mut best, &mut on_path);
    best
}

/// Exhaustive maximin events for maps whose values are pairwise distinct.
pub fn exhaustive_events(pred: &Grid2, labels: &[u32]) -> Vec<MaximinEvent> {
    let (w, h) = pred.shape();
    let values = pred.values();
    let mut events: BTreeMap<usize, MaximinEvent> = BTreeMap::new();
    for p in 0..w * h {
        if labels[p] == 0 {
            continue;
        }
        let best = bottlenecks_from(values, w, h, p);
        for q in p + 1..w * h {
            if labels[q] == 0 {
                continue;
            }
            let b = best[q];
            let pixel = values
                .iter()
                .position(|&x| x == b)
                .expect("bottleneck is a pixel value");
            let e = events.entry(pixel).or_insert(MaximinEvent {
                pixel,
                value: b,
                cross_pairs: 0,
                same_pairs: 0,
            });
            if labels[p] == labels[q] {
                e.same_pairs += 1;
            } else {
                e.cross_pairs += 1;
            }
        }
    }
    events.into_values().collect()
}

/// Map with pairwise distinct values and a random labeling with 1 to 3
/// regions (label 0 = annotation). Regions need not be connected.
pub fn random_labeled_map(rng: &mut impl Rng, max_side: usize) -> (Grid2, RegionLabeling) {
    let w = rng.random_range(1..=max_side);
    let h = rng.random_range(2..=max_side);
    let n = w * h;
    let mut ranks: Vec<usize> = (0..n).collect();
    ranks.shuffle(rng);
    let values: Vec<f64> = ranks.iter().map(|&r| 0.5 + r as f64 * 0.75).collect();
    let k = rng.random_range(1..=3u32);
    let raw: Vec<u32> = (0..n).map(|_| rng.random_range(0..=k)).collect();
    // compress to contiguous labels 1..=k'
    let mut used: Vec<u32> = raw.iter().copied().filter(|&l| l > 0).collect();
    used.sort_unstable();
    used.dedup();
    let labels: Vec<u32> = raw
        .iter()
        .map(|&l| {
            if l == 0 {
                0
            } else {
                used.binary_search(&l).unwrap() as u32 + 1
            }
        })
        .collect();
    (
        Grid2::from_values(w, h, values).unwrap(),
        RegionLabeling::from_labels(w, h, labels).unwrap(),
    )
}

/// Nearest-neighbour CCQ by exhaustive distance scans.
pub fn ccq_brute(pred: &[[i64; 3]], gt: &[[i64; 3]], tolerance: f64) -> CcqScores {
    if pred.is_empty() {
        let v = if gt.is_empty() { 1.0 } else { 0.0 };
        return CcqScores {
            correctness: v,
            completeness: v,
            quality: v,
        };
    }
    let nearest = |p: &[i64; 3], set: &[[i64; 3]]| {
        set.iter()
            .map(|q| {
                (((p[0] - q[0]).pow(2) + (p[1] - q[1]).pow(2) + (p[2] - q[2]).pow(2)) as f64).sqrt()
            })
            .fold(f64::INFINITY, f64::min)
    };
    let tp = pred.iter().filter(|p| nearest(p, gt) < tolerance).count();
    let matched = gt.iter().filter(|g| nearest(g, pred) < tolerance).count();
    let fp = pred.len() - tp;
    let fn_ = gt.len() - matched;
    CcqScores {
        correctness: tp as f64 / pred.len() as f64,
        completeness: if gt.is_empty() {
            1.0
        } else {
            matched as f64 / gt.len() as f64
        },
        quality: tp as f64 / (tp + fp + fn_) as f64,
    }
}

/// Every axis projection of `gt` separates its dilated regions by zeros.
pub fn admissible(gt: &DistanceVolume, cfg: &TopoConfig) -> bool {
    Axis::ALL
        .iter()
        .all(|&a| zero_separated(&min_projection(gt, a).values, cfg))
}

/// First scene from `draw` whose ground truth is admissible, with its
/// synthesis and the number of rejected draws.
pub fn admissible_draw<R: Rng>(
    rng: &mut R,
    mut draw: impl FnMut(&mut R) -> Scene,
) -> (Scene, SynthOutput, usize) {
    let cfg = TopoConfig::default();
    let mut rejected = 0;
    loop {
        let scene = draw(rng);
        let out = synth_volume(&scene).unwrap();
        if admissible(&out.ground_truth, &cfg) {
            return (scene, out, rejected);
        }
        rejected += 1;
    }
}

/// Random single-tube scene (optionally with a gap) with an admissible ground truth.
pub fn admissible_tube_scene<R: Rng>(
    rng: &mut R,
    size: usize,
    gap_length: Option<f64>,
) -> (Scene, SynthOutput, usize) {
    admissible_draw(rng, |r| random_tube_scene(size, 4, gap_length, r))
}

/// Volume-spanning single-tube scene with an admissible ground truth.
pub fn admissible_spanning_scene<R: Rng>(
    rng: &mut R,
    size: usize,
    gap_length: Option<f64>,
) -> (Scene, SynthOutput, usize) {
    admissible_draw(rng, |r| spanning_tube_scene(size, 4, gap_length, r))
}

/// 26-connected component count of `vol < level` (independent flood fill).
pub fn sublevel_components(vol: &DistanceVolume, level: f64) -> usize {
    let d = vol.dims();
    let mask: Vec<bool> = vol.values().iter().map(|&v| v < level).collect();
    let mut seen = vec![false; mask.len()];
    let mut count = 0;
    for s in 0..mask.len() {
        if !mask[s] || seen[s] {
            continue;
        }
        count += 1;
        seen[s] = true;
        let mut stack = vec![s];
        while let Some(i) = stack.pop() {
            let [x, y, z] = d.coords(i);
            for dz in -1i64..=1 {
                for dy in -1i64..=1 {
                    for dx in -1i64..=1 {
                        let (a, b, c) = (x as i64 + dx, y as i64 + dy, z as i64 + dz);
                        if a < 0
                            || b < 0
                            || c < 0
                            || a >= d.x as i64
                            || b >= d.y as i64
                            || c >= d.z as i64
                        {
                            continue;
                        }
                        let j = d.index(a as usize, b as usize, c as usize);
                        if mask[j] && !seen[j] {
                            seen[j] = true;
                            stack.push(j);
                        }
                    }
                }
            }
        }
    }
    count
}
