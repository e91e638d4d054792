use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::AnnotationGraph;
use crate::swc::to_swc;
use crate::volume::{Dims, DistanceVolume};

use super::skeleton::{label_components, neighbours26, skeletonize};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExtractionConfig {
    /// Voxels with `pred < threshold` are foreground.
    pub threshold: f64,
}

impl Default for ExtractionConfig {
    fn default() -> Self {
        ExtractionConfig { threshold: 2.0 }
    }
}

impl ExtractionConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.threshold > 0.0 && self.threshold.is_finite()) {
            return Err(Error::Config(format!(
                "threshold must be > 0, got {}",
                self.threshold
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Extracted,
    Annotation,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpatialNode {
    pub id: usize,
    pub pos: [i64; 3],
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpatialEdge {
    pub a: usize,
    pub b: usize,
    pub length: f64,
}

/// Simple undirected graph; node ids equal their index in `nodes`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpatialGraph {
    pub nodes: Vec<SpatialNode>,
    pub edges: Vec<SpatialEdge>,
    pub provenance: Provenance,
    /// Skeleton voxels (flat indices, ascending) for extracted graphs.
    #[serde(default)]
    pub voxels: Vec<usize>,
}

impl SpatialGraph {
    pub fn empty(provenance: Provenance) -> Self {
        SpatialGraph {
            nodes: Vec::new(),
            edges: Vec::new(),
            provenance,
            voxels: Vec::new(),
        }
    }

    /// Annotation graph with positions rounded to voxels; edge lengths use the
    /// exact positions.
    pub fn from_annotation(graph: &AnnotationGraph) -> Self {
        let index: HashMap<i64, usize> = graph
            .nodes()
            .iter()
            .enumerate()
            .map(|(k, n)| (n.id, k))
            .collect();
        let nodes = graph
            .nodes()
            .iter()
            .enumerate()
            .map(|(k, n)| SpatialNode {
                id: k,
                pos: n.pos.map(|c| c.round() as i64),
            })
            .collect();
        let mut seen = BTreeMap::new();
        for &(a, b) in graph.edges() {
            let (ia, ib) = (index[&a], index[&b]);
            let key = (ia.min(ib), ia.max(ib));
            let pa = graph.nodes()[ia].pos;
            let pb = graph.nodes()[ib].pos;
            seen.entry(key).or_insert_with(|| euclid(pa, pb));
        }
        let edges = seen
            .into_iter()
            .map(|((a, b), length)| SpatialEdge { a, b, length })
            .collect();
        SpatialGraph {
            nodes,
            edges,
            provenance: Provenance::Annotation,
            voxels: Vec::new(),
        }
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn degree(&self, id: usize) -> usize {
        self.edges.iter().filter(|e| e.a == id || e.b == id).count()
    }

    /// Connected component index per node, numbered in order of first node.
    pub fn components(&self) -> Vec<usize> {
        let n = self.nodes.len();
        let mut adj = vec![Vec::new(); n];
        for e in &self.edges {
            adj[e.a].push(e.b);
            adj[e.b].push(e.a);
        }
        let mut comp = vec![usize::MAX; n];
        let mut next = 0;
        for s in 0..n {
            if comp[s] != usize::MAX {
                continue;
            }
            comp[s] = next;
            let mut stack = vec![s];
            while let Some(c) = stack.pop() {
                for &m in &adj[c] {
                    if comp[m] == usize::MAX {
                        comp[m] = next;
                        stack.push(m);
                    }
                }
            }
            next += 1;
        }
        comp
    }

    pub fn component_count(&self) -> usize {
        self.components().into_iter().max().map_or(0, |m| m + 1)
    }

    pub fn to_swc(&self) -> String {
        let nodes: Vec<([f64; 3], i64)> = self
            .nodes
            .iter()
            .map(|n| (n.pos.map(|c| c as f64), n.id as i64 + 1))
            .collect();
        let edges: Vec<(usize, usize)> = self.edges.iter().map(|e| (e.a, e.b)).collect();
        to_swc(&nodes, &edges)
    }
}

fn euclid(a: [f64; 3], b: [f64; 3]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}

fn voxel_distance(dims: Dims, a: usize, b: usize) -> f64 {
    euclid(
        dims.coords(a).map(|c| c as f64),
        dims.coords(b).map(|c| c as f64),
    )
}

struct Builder {
    dims: Dims,
    /// node index -> representative voxel
    reps: Vec<usize>,
    edges: BTreeMap<(usize, usize), f64>,
}

impl Builder {
    fn add_node(&mut self, voxel: usize) -> usize {
        self.reps.push(voxel);
        self.reps.len() - 1
    }

    fn add_edge(&mut self, a: usize, b: usize, length: f64) {
        let key = (a.min(b), a.max(b));
        let slot = self.edges.entry(key).or_insert(length);
        *slot = slot.min(length);
    }

    /// Adds a chain `a -> path -> b`. Self-loops and parallel edges are split
    /// at interior voxels so the graph stays simple.
    fn add_chain(&mut self, a: usize, b: usize, path: &[usize]) {
        let dims = self.dims;
        let mut points = Vec::with_capacity(path.len() + 2);
        points.push(self.reps[a]);
        points.extend_from_slice(path);
        points.push(self.reps[b]);
        let prefix: Vec<f64> = std::iter::once(0.0)
            .chain(points.windows(2).scan(0.0, |acc, w| {
                *acc += voxel_distance(dims, w[0], w[1]);
                Some(*acc)
            }))
            .collect();
        let total = *prefix.last().expect("non-empty");

        let cuts: Vec<usize> = if a == b {
            if path.len() < 2 {
                return;
            }
            vec![1 + path.len() / 3, 1 + (2 * path.len()) / 3]
        } else if self.edges.contains_key(&(a.min(b), a.max(b))) && !path.is_empty() {
            vec![1 + (path.len() - 1) / 2]
        } else {
            self.add_edge(a, b, total);
            return;
        };

        let mut prev_node = a;
        let mut prev_at = 0;
        for &c in &cuts {
            let node = self.add_node(points[c]);
            self.add_edge(prev_node, node, prefix[c] - prefix[prev_at]);
            prev_node = node;
            prev_at = c;
        }
        self.add_edge(prev_node, b, total - prefix[prev_at]);
    }
}

/// Walks a degree-2 chain from node voxel `start` through `first` until the
/// next node voxel. Returns the chain voxels and that node voxel.
fn trace(
    skel: &[bool],
    dims: Dims,
    node_of: &HashMap<usize, usize>,
    start: usize,
    first: usize,
    consumed: &mut [bool],
) -> (Vec<usize>, usize) {
    let mut path = Vec::new();
    let (mut prev, mut cur) = (start, first);
    while !node_of.contains_key(&cur) {
        consumed[cur] = true;
        path.push(cur);
        let next = neighbours26(dims, cur)
            .find(|&n| skel[n] && n != prev)
            .expect("chain voxel has two neighbours");
        prev = cur;
        cur = next;
    }
    (path, cur)
}

/// Threshold, skeletonize and convert the skeleton to a graph.
///
/// Voxels with a skeleton degree other than 2 are node voxels. Adjacent
/// junction voxels (degree >= 3) collapse into one node placed at the voxel
/// nearest their centroid. Chains of degree-2 voxels become edges whose
/// length is the summed step length between representative voxels. Cycles
/// without node voxels are anchored at their smallest voxel index.
pub fn extract_graph(pred: &DistanceVolume, cfg: &ExtractionConfig) -> Result<SpatialGraph> {
    cfg.validate()?;
    let dims = pred.dims();
    let mask: Vec<bool> = pred.values().iter().map(|&v| v < cfg.threshold).collect();
    if !mask.iter().any(|&m| m) {
        return Ok(SpatialGraph::empty(Provenance::Extracted));
    }
    Ok(graph_from_skeleton(&skeletonize(&mask, dims), dims))
}

/// Converts a one-voxel-wide skeleton to a simple graph.
pub fn graph_from_skeleton(skel: &[bool], dims: Dims) -> SpatialGraph {
    let voxels: Vec<usize> = (0..skel.len()).filter(|&i| skel[i]).collect();
    let neighbours =
        |i: usize| -> Vec<usize> { neighbours26(dims, i).filter(|&j| skel[j]).collect() };
    let degree: HashMap<usize, usize> = voxels.iter().map(|&v| (v, neighbours(v).len())).collect();

    // junction clusters
    let junction: Vec<bool> = (0..skel.len())
        .map(|i| skel[i] && degree[&i] >= 3)
        .collect();
    let (jlabels, jcount) = label_components(&junction, dims);
    let mut clusters: Vec<Vec<usize>> = vec![Vec::new(); jcount];
    for &v in &voxels {
        if jlabels[v] > 0 {
            clusters[jlabels[v] as usize - 1].push(v);
        }
    }

    // node voxels -> node index, nodes ordered by representative voxel
    let mut reps: Vec<(usize, Vec<usize>)> = Vec::new();
    for cluster in clusters {
        let n = cluster.len() as f64;
        let mut c = [0.0; 3];
        for &v in &cluster {
            let p = dims.coords(v);
            for k in 0..3 {
                c[k] += p[k] as f64 / n;
            }
        }
        let rep = *cluster
            .iter()
            .min_by(|&&a, &&b| {
                let da = euclid(dims.coords(a).map(|x| x as f64), c);
                let db = euclid(dims.coords(b).map(|x| x as f64), c);
                da.total_cmp(&db).then(a.cmp(&b))
            })
            .expect("non-empty cluster");
        reps.push((rep, cluster));
    }
    for &v in &voxels {
        if degree[&v] < 2 {
            reps.push((v, vec![v]));
        }
    }
    reps.sort_by_key(|r| r.0);

    let mut node_of: HashMap<usize, usize> = HashMap::new();
    let mut b = Builder {
        dims,
        reps: Vec::with_capacity(reps.len()),
        edges: BTreeMap::new(),
    };
    for (rep, members) in &reps {
        let id = b.add_node(*rep);
        for &m in members {
            node_of.insert(m, id);
        }
    }

    let mut consumed = vec![false; skel.len()];
    let node_voxels: Vec<usize> = {
        let mut v: Vec<usize> = node_of.keys().copied().collect();
        v.sort_unstable();
        v
    };
    for &s in &node_voxels {
        let ns = node_of[&s];
        for t in neighbours(s) {
            if let Some(&nt) = node_of.get(&t) {
                if nt != ns && s < t {
                    let len = voxel_distance(dims, b.reps[ns], s)
                        + voxel_distance(dims, s, t)
                        + voxel_distance(dims, t, b.reps[nt]);
                    b.add_edge(ns, nt, len);
                }
                continue;
            }
            if consumed[t] {
                continue;
            }
            let (path, end) = trace(skel, dims, &node_of, s, t, &mut consumed);
            let ne = node_of[&end];
            let mut full = Vec::with_capacity(path.len() + 2);
            if s != b.reps[ns] {
                full.push(s);
            }
            full.extend_from_slice(&path);
            if end != b.reps[ne] {
                full.push(end);
            }
            b.add_chain(ns, ne, &full);
        }
    }

    // cycles made only of degree-2 voxels
    for &v in &voxels {
        if consumed[v] || node_of.contains_key(&v) {
            continue;
        }
        let anchor = b.add_node(v);
        node_of.insert(v, anchor);
        consumed[v] = true;
        let first = neighbours(v)[0];
        let (path, _) = trace(skel, dims, &node_of, v, first, &mut consumed);
        b.add_chain(anchor, anchor, &path);
    }

    let nodes = b
        .reps
        .iter()
        .enumerate()
        .map(|(id, &v)| {
            let c = dims.coords(v);
            SpatialNode {
                id,
                pos: [c[0] as i64, c[1] as i64, c[2] as i64],
            }
        })
        .collect();
    let edges = b
        .edges
        .into_iter()
        .map(|((a, c), length)| SpatialEdge { a, b: c, length })
        .collect();
    SpatialGraph {
        nodes,
        edges,
        provenance: Provenance::Extracted,
        voxels,
    }
}
