//! Pose-graph container with canonical edge orientation.

use thiserror::Error;

use crate::rotation::Rotation;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GraphError {
    #[error("self-loop on node {0}")]
    SelfLoop(usize),
    #[error("duplicate edge ({0}, {1})")]
    DuplicateEdge(usize, usize),
    #[error("edge ({0}, {1}) references a node outside 0..{2}")]
    NodeOutOfRange(usize, usize, usize),
    #[error("graph is disconnected ({0} components)")]
    Disconnected(usize),
    #[error("node {0} has no neighbors")]
    IsolatedNode(usize),
}

/// A measured relative rotation `R_ij ≈ R_i R_jᵀ`, stored with `i < j`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub i: usize,
    pub j: usize,
    pub rotation: Rotation,
}

/// Undirected measurement graph on nodes `0..n`.
#[derive(Debug, Clone)]
pub struct ViewGraph {
    n: usize,
    edges: Vec<Edge>,
    /// Per node, `(neighbor, edge id)` sorted by neighbor.
    adjacency: Vec<Vec<(usize, usize)>>,
}

impl ViewGraph {
    /// Builds a graph from `(i, j, R_ij)` triples. Edges given with `i > j` are
    /// flipped and their rotation transposed. Edge ids follow input order.
    pub fn new<I>(n: usize, edges: I) -> Result<Self, GraphError>
    where
        I: IntoIterator<Item = (usize, usize, Rotation)>,
    {
        let mut adjacency = vec![Vec::new(); n];
        let mut out = Vec::new();
        for (a, b, r) in edges {
            if a >= n || b >= n {
                return Err(GraphError::NodeOutOfRange(a, b, n));
            }
            if a == b {
                return Err(GraphError::SelfLoop(a));
            }
            let (i, j, rotation) = if a < b { (a, b, r) } else { (b, a, r.transpose()) };
            let id = out.len();
            out.push(Edge { i, j, rotation });
            adjacency[i].push((j, id));
            adjacency[j].push((i, id));
        }
        for (node, adj) in adjacency.iter_mut().enumerate() {
            adj.sort_unstable();
            if let Some(w) = adj.windows(2).find(|w| w[0].0 == w[1].0) {
                let (i, j) = if node < w[0].0 { (node, w[0].0) } else { (w[0].0, node) };
                return Err(GraphError::DuplicateEdge(i, j));
            }
        }
        Ok(Self {
            n,
            edges: out,
            adjacency,
        })
    }

    pub fn num_nodes(&self) -> usize {
        self.n
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn edge(&self, id: usize) -> &Edge {
        &self.edges[id]
    }

    /// `(neighbor, edge id)` pairs of `node`, sorted by neighbor.
    pub fn neighbors(&self, node: usize) -> &[(usize, usize)] {
        &self.adjacency[node]
    }

    pub fn degree(&self, node: usize) -> usize {
        self.adjacency[node].len()
    }

    pub fn edge_id(&self, a: usize, b: usize) -> Option<usize> {
        let adj = self.adjacency.get(a)?;
        adj.binary_search_by_key(&b, |&(k, _)| k).ok().map(|p| adj[p].1)
    }

    /// The measurement oriented from `a` to `b` (`R_ab`, or `R_baᵀ`).
    pub fn relative(&self, a: usize, b: usize) -> Option<Rotation> {
        let e = &self.edges[self.edge_id(a, b)?];
        Some(if e.i == a { e.rotation } else { e.rotation.transpose() })
    }

    /// Component label per node.
    pub fn components(&self) -> (usize, Vec<usize>) {
        let mut label = vec![usize::MAX; self.n];
        let mut count = 0;
        let mut stack = Vec::new();
        for start in 0..self.n {
            if label[start] != usize::MAX {
                continue;
            }
            label[start] = count;
            stack.push(start);
            while let Some(u) = stack.pop() {
                for &(v, _) in &self.adjacency[u] {
                    if label[v] == usize::MAX {
                        label[v] = count;
                        stack.push(v);
                    }
                }
            }
            count += 1;
        }
        (count, label)
    }

    pub fn is_connected(&self) -> bool {
        self.n > 0 && self.components().0 == 1
    }

    pub fn check_connected(&self) -> Result<(), GraphError> {
        match self.components().0 {
            1 => Ok(()),
            c => Err(GraphError::Disconnected(c)),
        }
    }

    /// A copy without the listed edges. Surviving edges keep their relative order.
    pub fn without_edges(&self, drop: &[usize]) -> Self {
        let mut keep = vec![true; self.edges.len()];
        for &e in drop {
            keep[e] = false;
        }
        let edges = self
            .edges
            .iter()
            .zip(keep)
            .filter(|(_, k)| *k)
            .map(|(e, _)| (e.i, e.j, e.rotation));
        Self::new(self.n, edges).expect("subgraph of a valid graph is valid")
    }
}

/// Ground-truth absolute rotations and per-edge corruption levels.
#[derive(Debug, Clone)]
pub struct GroundTruth {
    pub rotations: Vec<Rotation>,
    /// `s*_ij = d(R_ij, R_i R_jᵀ)`, indexed by edge id.
    pub corruption: Vec<f64>,
    /// `true` for corrupted edges.
    pub corrupted: Vec<bool>,
}

impl GroundTruth {
    /// Derives corruption levels from the absolute rotations. Labels mark every
    /// edge with nonzero corruption as bad.
    pub fn from_rotations(graph: &ViewGraph, rotations: Vec<Rotation>) -> Self {
        let corruption = corruption_levels(graph, &rotations);
        let corrupted = corruption.iter().map(|&s| s > 0.0).collect();
        Self {
            rotations,
            corruption,
            corrupted,
        }
    }
}

/// `d(R_ij, R_i R_jᵀ)` for every edge.
pub fn corruption_levels(graph: &ViewGraph, rotations: &[Rotation]) -> Vec<f64> {
    graph
        .edges()
        .iter()
        .map(|e| {
            let truth = rotations[e.i] * rotations[e.j].transpose();
            e.rotation.angular_distance(&truth)
        })
        .collect()
}
