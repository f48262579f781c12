//! 3-cycle enumeration with per-edge sampling and precomputed cycle
//! inconsistencies.

use rand::seq::index;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{GroundTruth, ViewGraph};
use crate::rotation::Rotation;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CycleError {
    #[error("{count} edge(s) lie on no 3-cycle: {0:?}", count = .0.len())]
    Uncovered(Vec<(usize, usize)>),
}

/// `d(R_ij R_jk R_ki, I)`: distance of the composed triangle from the identity.
pub fn cycle_inconsistency(r_ij: &Rotation, r_jk: &Rotation, r_ki: &Rotation) -> f64 {
    (r_ij * r_jk * *r_ki).angular_distance(&Rotation::identity())
}

/// How many 3-cycles to keep per edge.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum CycleBudget {
    /// Keep every 3-cycle.
    All,
    /// Keep at most this many.
    Fixed(usize),
    /// `max(⌈median / 4⌉, min)` where `median` is the median cycle count per edge.
    MedianQuarter { min: usize },
}

impl Default for CycleBudget {
    fn default() -> Self {
        CycleBudget::MedianQuarter { min: 30 }
    }
}

impl CycleBudget {
    /// Per-edge sample size given the full cycle counts. `None` keeps everything.
    pub fn resolve(&self, counts: &[usize]) -> Option<usize> {
        match *self {
            CycleBudget::All => None,
            CycleBudget::Fixed(b) => Some(b.max(1)),
            CycleBudget::MedianQuarter { min } => {
                Some(median_quarter(median_count(counts)).max(min).max(1))
            }
        }
    }
}

fn median_count(counts: &[usize]) -> f64 {
    if counts.is_empty() {
        return 0.0;
    }
    let mut sorted = counts.to_vec();
    sorted.sort_unstable();
    let m = sorted.len();
    if m % 2 == 1 {
        sorted[m / 2] as f64
    } else {
        (sorted[m / 2 - 1] + sorted[m / 2]) as f64 / 2.0
    }
}

fn median_quarter(median: f64) -> usize {
    (median / 4.0).ceil() as usize
}

/// Common neighbors of the endpoints of every edge, by sorted-adjacency merge.
pub fn common_neighbors(graph: &ViewGraph) -> Vec<Vec<usize>> {
    graph
        .edges()
        .iter()
        .map(|e| {
            let (a, b) = (graph.neighbors(e.i), graph.neighbors(e.j));
            let mut out = Vec::new();
            let (mut x, mut y) = (0, 0);
            while x < a.len() && y < b.len() {
                match a[x].0.cmp(&b[y].0) {
                    std::cmp::Ordering::Less => x += 1,
                    std::cmp::Ordering::Greater => y += 1,
                    std::cmp::Ordering::Equal => {
                        out.push(a[x].0);
                        x += 1;
                        y += 1;
                    }
                }
            }
            out
        })
        .collect()
}

/// Edges that lie on no 3-cycle, as `(i, j)` pairs with their ids.
pub fn uncovered_edges(graph: &ViewGraph) -> Vec<usize> {
    common_neighbors(graph)
        .iter()
        .enumerate()
        .filter(|(_, c)| c.is_empty())
        .map(|(e, _)| e)
        .collect()
}

/// Sampled cycle sets `C_ij` with inconsistencies `d_ij,k`, in a flat layout.
///
/// Slots of edge `e` occupy `offsets[e]..offsets[e + 1]`. For each slot the ids
/// of the two other triangle edges are stored, and for each edge the reverse
/// list of slots (of other edges) in which it appears.
#[derive(Debug, Clone, PartialEq)]
pub struct CycleTable {
    ends: Vec<(usize, usize)>,
    offsets: Vec<usize>,
    nodes: Vec<usize>,
    d: Vec<f64>,
    edge_ik: Vec<usize>,
    edge_jk: Vec<usize>,
    incident_offsets: Vec<usize>,
    incident_slots: Vec<usize>,
}

impl CycleTable {
    /// Builds the table from explicit per-edge cycle nodes. Every listed `k` must be
    /// a common neighbor of the edge's endpoints.
    pub fn from_cycle_nodes(
        graph: &ViewGraph,
        cycle_nodes: Vec<Vec<usize>>,
    ) -> Result<Self, CycleError> {
        assert_eq!(cycle_nodes.len(), graph.num_edges());
        let uncovered: Vec<_> = cycle_nodes
            .iter()
            .enumerate()
            .filter(|(_, c)| c.is_empty())
            .map(|(e, _)| (graph.edge(e).i, graph.edge(e).j))
            .collect();
        if !uncovered.is_empty() {
            return Err(CycleError::Uncovered(uncovered));
        }

        let m = graph.num_edges();
        let mut offsets = Vec::with_capacity(m + 1);
        offsets.push(0);
        for c in &cycle_nodes {
            offsets.push(offsets.last().unwrap() + c.len());
        }
        let total = *offsets.last().unwrap();
        let mut nodes = Vec::with_capacity(total);
        let mut edge_ik = Vec::with_capacity(total);
        let mut edge_jk = Vec::with_capacity(total);
        for (e, c) in cycle_nodes.iter().enumerate() {
            let edge = graph.edge(e);
            let mut sorted = c.clone();
            sorted.sort_unstable();
            for k in sorted {
                let ik = graph.edge_id(edge.i, k).expect("cycle node must neighbor i");
                let jk = graph.edge_id(edge.j, k).expect("cycle node must neighbor j");
                nodes.push(k);
                edge_ik.push(ik);
                edge_jk.push(jk);
            }
        }

        let d: Vec<f64> = (0..m)
            .into_par_iter()
            .flat_map_iter(|e| {
                let edge = graph.edge(e);
                let r_ij = edge.rotation;
                (offsets[e]..offsets[e + 1])
                    .map(|slot| {
                        let k = nodes[slot];
                        let r_jk = graph.relative(edge.j, k).unwrap();
                        let r_ki = graph.relative(k, edge.i).unwrap();
                        cycle_inconsistency(&r_ij, &r_jk, &r_ki)
                    })
                    .collect::<Vec<_>>()
            })
            .collect();

        let mut counts = vec![0usize; m];
        for slot in 0..total {
            counts[edge_ik[slot]] += 1;
            counts[edge_jk[slot]] += 1;
        }
        let mut incident_offsets = Vec::with_capacity(m + 1);
        incident_offsets.push(0);
        for c in &counts {
            incident_offsets.push(incident_offsets.last().unwrap() + c);
        }
        let mut fill = incident_offsets[..m].to_vec();
        let mut incident_slots = vec![0; 2 * total];
        for slot in 0..total {
            for e in [edge_ik[slot], edge_jk[slot]] {
                incident_slots[fill[e]] = slot;
                fill[e] += 1;
            }
        }

        Ok(Self {
            ends: graph.edges().iter().map(|e| (e.i, e.j)).collect(),
            offsets,
            nodes,
            d,
            edge_ik,
            edge_jk,
            incident_offsets,
            incident_slots,
        })
    }

    /// Replaces the stored inconsistencies, e.g. for hand-built instances.
    ///
    /// # Panics
    /// If the length differs from the number of slots or a value leaves `[0, 1]`.
    pub fn with_inconsistencies(mut self, d: Vec<f64>) -> Self {
        assert_eq!(d.len(), self.nodes.len(), "one inconsistency per slot");
        assert!(d.iter().all(|x| (0.0..=1.0).contains(x)));
        self.d = d;
        self
    }

    pub fn num_edges(&self) -> usize {
        self.ends.len()
    }

    pub fn num_slots(&self) -> usize {
        self.nodes.len()
    }

    pub fn offsets(&self) -> &[usize] {
        &self.offsets
    }

    pub fn slots(&self, e: usize) -> std::ops::Range<usize> {
        self.offsets[e]..self.offsets[e + 1]
    }

    pub fn len_of(&self, e: usize) -> usize {
        self.offsets[e + 1] - self.offsets[e]
    }

    pub fn endpoints(&self, e: usize) -> (usize, usize) {
        self.ends[e]
    }

    /// Sorted cycle nodes `C_ij` of edge `e`.
    pub fn cycle_nodes(&self, e: usize) -> &[usize] {
        &self.nodes[self.slots(e)]
    }

    /// Inconsistencies `d_ij` of edge `e`, aligned with [`Self::cycle_nodes`].
    pub fn inconsistencies(&self, e: usize) -> &[f64] {
        &self.d[self.slots(e)]
    }

    pub fn all_inconsistencies(&self) -> &[f64] {
        &self.d
    }

    /// Ids of edges `ik` and `jk` for a global slot index.
    pub fn slot_edges(&self, slot: usize) -> (usize, usize) {
        (self.edge_ik[slot], self.edge_jk[slot])
    }

    /// Global slots (belonging to other edges) whose triangle contains edge `e`.
    pub fn incident_slots(&self, e: usize) -> &[usize] {
        &self.incident_slots[self.incident_offsets[e]..self.incident_offsets[e + 1]]
    }
}

/// Enumerates 3-cycles and samples at most `budget` of them per edge, uniformly
/// without replacement.
pub fn build_cycle_table<R: Rng + ?Sized>(
    graph: &ViewGraph,
    budget: CycleBudget,
    rng: &mut R,
) -> Result<CycleTable, CycleError> {
    let common = common_neighbors(graph);
    let counts: Vec<usize> = common.iter().map(Vec::len).collect();
    let cap = budget.resolve(&counts);
    let selected = common
        .into_iter()
        .map(|c| match cap {
            Some(b) if c.len() > b => {
                let mut pick: Vec<usize> =
                    index::sample(rng, c.len(), b).into_iter().map(|x| c[x]).collect();
                pick.sort_unstable();
                pick
            }
            _ => c,
        })
        .collect();
    CycleTable::from_cycle_nodes(graph, selected)
}

/// `|d_ij,k − s*_ij| ≤ s*_ik + s*_jk` for every stored cycle, to 1e-9.
pub fn stability_bound_check(table: &CycleTable, truth: &GroundTruth) -> bool {
    stability_bound_violation(table, truth) <= 1e-9
}

/// Largest violation of the stability bound over stored cycles (≤ 0 when it holds).
pub fn stability_bound_violation(table: &CycleTable, truth: &GroundTruth) -> f64 {
    let s = &truth.corruption;
    let mut worst = f64::NEG_INFINITY;
    for e in 0..table.num_edges() {
        for slot in table.slots(e) {
            let (ik, jk) = table.slot_edges(slot);
            let gap = (table.d[slot] - s[e]).abs() - (s[ik] + s[jk]);
            worst = worst.max(gap);
        }
    }
    worst
}
