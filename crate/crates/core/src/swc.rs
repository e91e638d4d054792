//! SWC text format: one node per line, `id type x y z radius parent`.
//!
//! Roots carry `parent = -1`. Radius is ignored on load and written as 1.0.
//! Lines starting with `#` and blank lines are skipped.

use std::collections::{HashMap, HashSet};
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::graph::{AnnotationGraph, Node};
use crate::volume::Dims;

/// One parsed SWC record.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SwcRecord {
    pub id: i64,
    pub kind: i64,
    pub pos: [f64; 3],
    pub radius: f64,
    pub parent: i64,
}

pub fn parse_swc(text: &str, source: &Path) -> Result<Vec<SwcRecord>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let err = |msg: String| Error::Parse {
            path: source.to_path_buf(),
            line: i + 1,
            msg,
        };
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 7 {
            return Err(err(format!("expected 7 fields, found {}", fields.len())));
        }
        let int = |s: &str, what: &str| {
            s.parse::<i64>()
                .map_err(|_| err(format!("invalid {what} '{s}'")))
        };
        let real = |s: &str, what: &str| {
            s.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| err(format!("invalid {what} '{s}'")))
        };
        out.push(SwcRecord {
            id: int(fields[0], "id")?,
            kind: int(fields[1], "type")?,
            pos: [
                real(fields[2], "x")?,
                real(fields[3], "y")?,
                real(fields[4], "z")?,
            ],
            radius: real(fields[5], "radius")?,
            parent: int(fields[6], "parent")?,
        });
    }
    Ok(out)
}

/// Converts parent pointers to an edge list and validates against `dims`.
pub fn graph_from_records(records: &[SwcRecord], dims: Dims) -> Result<AnnotationGraph> {
    let nodes: Vec<Node> = records
        .iter()
        .map(|r| Node {
            id: r.id,
            pos: r.pos,
        })
        .collect();
    let edges: Vec<(i64, i64)> = records
        .iter()
        .filter(|r| r.parent != -1)
        .map(|r| (r.parent, r.id))
        .collect();
    AnnotationGraph::new(nodes, edges, dims)
}

pub fn load_graph(path: &Path, dims: Dims) -> Result<AnnotationGraph> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let records = parse_swc(&text, path)?;
    graph_from_records(&records, dims)
}

/// Serializes a graph as an SWC forest.
///
/// Every edge is emitted exactly once. Edges that close a cycle (or give a
/// node a second parent) are written through a duplicate node at the same
/// position, so the file stays a valid forest.
pub fn to_swc(nodes: &[([f64; 3], i64)], edges: &[(usize, usize)]) -> String {
    let n = nodes.len();
    let mut adj = vec![Vec::new(); n];
    for (k, &(a, b)) in edges.iter().enumerate() {
        adj[a].push((b, k));
        adj[b].push((a, k));
    }
    for list in &mut adj {
        list.sort_unstable();
    }

    let mut out = String::new();
    let mut next_id = 1i64;
    let mut swc_id = vec![0i64; n];
    let mut used = vec![false; edges.len()];
    let mut visited = vec![false; n];
    let mut emit = |out: &mut String, pos: [f64; 3], kind: i64, parent: i64| -> i64 {
        let id = next_id;
        next_id += 1;
        let _ = writeln!(
            out,
            "{} {} {} {} {} 1.0 {}",
            id, kind, pos[0], pos[1], pos[2], parent
        );
        id
    };

    let mut extra: Vec<(usize, usize)> = Vec::new();
    for root in 0..n {
        if visited[root] {
            continue;
        }
        visited[root] = true;
        swc_id[root] = emit(&mut out, nodes[root].0, nodes[root].1, -1);
        let mut stack = vec![root];
        while let Some(cur) = stack.pop() {
            for &(nb, k) in &adj[cur] {
                if used[k] {
                    continue;
                }
                used[k] = true;
                if visited[nb] {
                    extra.push((cur, nb));
                } else {
                    visited[nb] = true;
                    swc_id[nb] = emit(&mut out, nodes[nb].0, nodes[nb].1, swc_id[cur]);
                    stack.push(nb);
                }
            }
        }
    }
    for (from, to) in extra {
        emit(&mut out, nodes[to].0, nodes[to].1, swc_id[from]);
    }
    out
}

/// SWC text for an annotation graph (ids are renumbered from 1).
pub fn graph_to_swc(graph: &AnnotationGraph) -> String {
    let index: HashMap<i64, usize> = graph
        .nodes()
        .iter()
        .enumerate()
        .map(|(i, n)| (n.id, i))
        .collect();
    let nodes: Vec<([f64; 3], i64)> = graph.nodes().iter().map(|n| (n.pos, 0)).collect();
    let mut seen = HashSet::new();
    let edges: Vec<(usize, usize)> = graph
        .edges()
        .iter()
        .map(|(a, b)| (index[a], index[b]))
        .filter(|&(a, b)| seen.insert((a.min(b), a.max(b))))
        .collect();
    to_swc(&nodes, &edges)
}
