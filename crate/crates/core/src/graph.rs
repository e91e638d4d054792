//! Centerline annotation graphs.

use std::collections::{HashMap, HashSet};

use crate::error::{Error, Result};
use crate::volume::Dims;

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum Dimensionality {
    Two,
    Three,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Node {
    pub id: i64,
    /// Position in voxel units; the third coordinate is zero for 2D graphs.
    pub pos: [f64; 3],
}

/// Polyline graph of centerlines. Construct through [`AnnotationGraph::new`],
/// which enforces the reference and bounds invariants.
#[derive(Clone, Debug, PartialEq)]
pub struct AnnotationGraph {
    nodes: Vec<Node>,
    edges: Vec<(i64, i64)>,
    dimensionality: Dimensionality,
}

impl AnnotationGraph {
    /// Validates a graph against the volume it will be rasterized into.
    /// A single-slice volume (`z == 1`) makes the graph 2D.
    pub fn new(nodes: Vec<Node>, edges: Vec<(i64, i64)>, dims: Dims) -> Result<Self> {
        let dimensionality = if dims.z == 1 {
            Dimensionality::Two
        } else {
            Dimensionality::Three
        };
        let mut seen = HashSet::with_capacity(nodes.len());
        let bounds = dims.as_array();
        for n in &nodes {
            if !seen.insert(n.id) {
                return Err(Error::Validation(format!("duplicate node id {}", n.id)));
            }
            if n.pos.iter().any(|c| !c.is_finite()) {
                return Err(Error::Validation(format!(
                    "node {} has a non-finite position",
                    n.id
                )));
            }
            if dimensionality == Dimensionality::Two && n.pos[2] != 0.0 {
                return Err(Error::Validation(format!(
                    "node {} of a 2D graph has z = {}, expected 0",
                    n.id, n.pos[2]
                )));
            }
            for (axis, (&c, &extent)) in n.pos.iter().zip(bounds.iter()).enumerate() {
                if c < 0.0 || c > (extent - 1) as f64 {
                    return Err(Error::Validation(format!(
                        "node {} at {:?} is outside the {} volume (axis {})",
                        n.id,
                        n.pos,
                        dims,
                        ["x", "y", "z"][axis]
                    )));
                }
            }
        }
        for &(a, b) in &edges {
            if a == b {
                return Err(Error::Validation(format!("edge ({a}, {b}) is a self-loop")));
            }
            for id in [a, b] {
                if !seen.contains(&id) {
                    return Err(Error::Validation(format!(
                        "edge ({a}, {b}) references missing node {id}"
                    )));
                }
            }
        }
        Ok(AnnotationGraph {
            nodes,
            edges,
            dimensionality,
        })
    }

    pub fn empty(dims: Dims) -> Self {
        AnnotationGraph::new(Vec::new(), Vec::new(), dims).expect("empty graph is valid")
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn edges(&self) -> &[(i64, i64)] {
        &self.edges
    }

    pub fn dimensionality(&self) -> Dimensionality {
        self.dimensionality
    }

    pub fn position(&self, id: i64) -> Option<[f64; 3]> {
        self.nodes.iter().find(|n| n.id == id).map(|n| n.pos)
    }

    /// Edge endpoints as coordinate pairs.
    pub fn segments(&self) -> Vec<([f64; 3], [f64; 3])> {
        let pos: HashMap<i64, [f64; 3]> = self.nodes.iter().map(|n| (n.id, n.pos)).collect();
        self.edges.iter().map(|(a, b)| (pos[a], pos[b])).collect()
    }

    pub fn degree(&self, id: i64) -> usize {
        self.edges
            .iter()
            .filter(|(a, b)| *a == id || *b == id)
            .count()
    }
}
