//! Topology-preserving 3D thinning.
//!
//! Boundary voxels are peeled in six directional sub-iterations. A voxel is
//! deleted only if it is simple (26-connected foreground, 6-connected
//! background) and is not a curve endpoint. Candidates are re-tested one by
//! one right before deletion, which keeps the sequential pass topology-safe.

use crate::volume::Dims;

const CENTER: usize = 13;

#[inline]
fn cube_index(dx: i32, dy: i32, dz: i32) -> usize {
    ((dx + 1) + 3 * (dy + 1) + 9 * (dz + 1)) as usize
}

fn offset(k: usize) -> (i32, i32, i32) {
    let k = k as i32;
    (k % 3 - 1, (k / 3) % 3 - 1, k / 9 - 1)
}

struct Adjacency {
    n26: Vec<Vec<usize>>,
    n6: Vec<Vec<usize>>,
    /// Cube cells in the 18-neighbourhood of the center (no corners, no center).
    in18: [bool; 27],
}

impl Adjacency {
    fn new() -> Self {
        let mut n26 = vec![Vec::new(); 27];
        let mut n6 = vec![Vec::new(); 27];
        for a in 0..27 {
            let (ax, ay, az) = offset(a);
            for b in 0..27 {
                if a == b {
                    continue;
                }
                let (bx, by, bz) = offset(b);
                let d = [(ax - bx).abs(), (ay - by).abs(), (az - bz).abs()];
                if d.iter().all(|&c| c <= 1) {
                    n26[a].push(b);
                    if d.iter().sum::<i32>() == 1 {
                        n6[a].push(b);
                    }
                }
            }
        }
        let mut in18 = [false; 27];
        for (k, slot) in in18.iter_mut().enumerate() {
            let (x, y, z) = offset(k);
            let m = x.abs() + y.abs() + z.abs();
            *slot = m == 1 || m == 2;
        }
        Adjacency { n26, n6, in18 }
    }

    fn components(
        &self,
        cells: &[bool; 27],
        adj: &[Vec<usize>],
        seeds_only: Option<&[usize]>,
    ) -> usize {
        let mut seen = [false; 27];
        let mut count = 0;
        let starts: Vec<usize> = match seeds_only {
            Some(s) => s.to_vec(),
            None => (0..27).collect(),
        };
        let mut stack = Vec::with_capacity(27);
        for s in starts {
            if !cells[s] || seen[s] {
                continue;
            }
            count += 1;
            seen[s] = true;
            stack.push(s);
            while let Some(c) = stack.pop() {
                for &n in &adj[c] {
                    if cells[n] && !seen[n] {
                        seen[n] = true;
                        stack.push(n);
                    }
                }
            }
        }
        count
    }

    fn is_simple(&self, nb: &[bool; 27]) -> bool {
        let mut fg = *nb;
        fg[CENTER] = false;
        if self.components(&fg, &self.n26, None) != 1 {
            return false;
        }
        let mut bg = [false; 27];
        for k in 0..27 {
            bg[k] = self.in18[k] && !nb[k];
        }
        let faces = [
            cube_index(-1, 0, 0),
            cube_index(1, 0, 0),
            cube_index(0, -1, 0),
            cube_index(0, 1, 0),
            cube_index(0, 0, -1),
            cube_index(0, 0, 1),
        ];
        self.components(&bg, &self.n6, Some(&faces)) == 1
    }
}

fn neighbourhood(mask: &[bool], dims: Dims, idx: usize) -> [bool; 27] {
    let [x, y, z] = dims.coords(idx);
    let mut nb = [false; 27];
    for dz in -1..=1i32 {
        for dy in -1..=1i32 {
            for dx in -1..=1i32 {
                let (xx, yy, zz) = (
                    x as i64 + dx as i64,
                    y as i64 + dy as i64,
                    z as i64 + dz as i64,
                );
                if xx < 0 || yy < 0 || zz < 0 {
                    continue;
                }
                let (xx, yy, zz) = (xx as usize, yy as usize, zz as usize);
                if xx >= dims.x || yy >= dims.y || zz >= dims.z {
                    continue;
                }
                nb[cube_index(dx, dy, dz)] = mask[dims.index(xx, yy, zz)];
            }
        }
    }
    nb
}

fn neighbour_count(nb: &[bool; 27]) -> usize {
    nb.iter()
        .enumerate()
        .filter(|&(k, &v)| v && k != CENTER)
        .count()
}

/// One-voxel-wide skeleton of `mask` that keeps its 26-connected components.
pub fn skeletonize(mask: &[bool], dims: Dims) -> Vec<bool> {
    assert_eq!(mask.len(), dims.len(), "mask does not match dims");
    let adj = Adjacency::new();
    let mut skel = mask.to_vec();
    let directions = [
        cube_index(0, -1, 0),
        cube_index(0, 1, 0),
        cube_index(1, 0, 0),
        cube_index(-1, 0, 0),
        cube_index(0, 0, 1),
        cube_index(0, 0, -1),
    ];
    let deletable = |nb: &[bool; 27]| neighbour_count(nb) > 1 && adj.is_simple(nb);

    loop {
        let mut changed = false;
        for &dir in &directions {
            let candidates: Vec<usize> = (0..skel.len())
                .filter(|&i| skel[i])
                .filter(|&i| {
                    let nb = neighbourhood(&skel, dims, i);
                    !nb[dir] && deletable(&nb)
                })
                .collect();
            for i in candidates {
                let nb = neighbourhood(&skel, dims, i);
                if deletable(&nb) {
                    skel[i] = false;
                    changed = true;
                }
            }
        }
        if !changed {
            break;
        }
    }
    skel
}

/// Number of 26-connected components of `mask`.
pub fn count_components(mask: &[bool], dims: Dims) -> usize {
    label_components(mask, dims).1
}

/// 26-connected component labels (0 = background) and the component count.
pub fn label_components(mask: &[bool], dims: Dims) -> (Vec<u32>, usize) {
    let mut labels = vec![0u32; mask.len()];
    let mut next = 0u32;
    let mut stack = Vec::new();
    for start in 0..mask.len() {
        if !mask[start] || labels[start] != 0 {
            continue;
        }
        next += 1;
        labels[start] = next;
        stack.push(start);
        while let Some(i) = stack.pop() {
            for j in neighbours26(dims, i) {
                if mask[j] && labels[j] == 0 {
                    labels[j] = next;
                    stack.push(j);
                }
            }
        }
    }
    (labels, next as usize)
}

/// In-bounds 26-neighbours of voxel `idx`.
pub fn neighbours26(dims: Dims, idx: usize) -> impl Iterator<Item = usize> {
    let [x, y, z] = dims.coords(idx);
    (0..27usize).filter(|&k| k != CENTER).filter_map(move |k| {
        let (dx, dy, dz) = offset(k);
        let xx = x as i64 + dx as i64;
        let yy = y as i64 + dy as i64;
        let zz = z as i64 + dz as i64;
        if xx < 0
            || yy < 0
            || zz < 0
            || xx >= dims.x as i64
            || yy >= dims.y as i64
            || zz >= dims.z as i64
        {
            None
        } else {
            Some(dims.index(xx as usize, yy as usize, zz as usize))
        }
    })
}
