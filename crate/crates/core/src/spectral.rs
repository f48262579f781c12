//! Spectral initialization from a corruption-weighted connection matrix.
//!
//! Block `(i, j)` of the `3n × 3n` matrix is `w_ij R_ij`, with weights
//! normalized over the neighbors of `i`. For consistent measurements the
//! stacked ground truth spans an invariant subspace with eigenvalue 1, so the
//! dominant 3-dimensional subspace, projected blockwise onto SO(3), recovers the
//! absolute rotations up to one global right factor.

use nalgebra::{DMatrix, Matrix3};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use thiserror::Error;

use crate::graph::ViewGraph;
use crate::rotation::{project_to_so3, Rotation, RotationError};

/// Upper cap on raw weights `ŝ^(-exponent)`; a zero estimate maps here.
pub const MAX_WEIGHT: f64 = 1e8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpectralError {
    #[error("node {0} has no neighbors")]
    IsolatedNode(usize),
    #[error("expected {expected} corruption estimates, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("orthogonal iteration did not converge in {iterations} iterations (residual {residual:.3e})")]
    NotConverged { iterations: usize, residual: f64 },
    #[error("block projection failed: {0}")]
    Projection(#[from] RotationError),
}

/// Row-normalized weights per ordered pair `(i, j)`.
#[derive(Debug, Clone)]
pub struct WeightedConnection {
    /// Per node `i`, `(j, edge id, w_ij)` with `Σ_j w_ij = 1`.
    rows: Vec<Vec<(usize, usize, f64)>>,
}

impl WeightedConnection {
    /// Equal weight `1/deg(i)` on every neighbor.
    pub fn uniform(graph: &ViewGraph) -> Result<Self, SpectralError> {
        Self::from_edge_weights(graph, &vec![1.0; graph.num_edges()])
    }

    /// Normalizes positive per-edge raw weights over each node's neighborhood.
    pub fn from_edge_weights(graph: &ViewGraph, raw: &[f64]) -> Result<Self, SpectralError> {
        if raw.len() != graph.num_edges() {
            return Err(SpectralError::LengthMismatch {
                expected: graph.num_edges(),
                got: raw.len(),
            });
        }
        let mut rows = Vec::with_capacity(graph.num_nodes());
        for node in 0..graph.num_nodes() {
            let nbrs = graph.neighbors(node);
            if nbrs.is_empty() {
                return Err(SpectralError::IsolatedNode(node));
            }
            let total: f64 = nbrs.iter().map(|&(_, e)| raw[e]).sum();
            rows.push(
                nbrs.iter()
                    .map(|&(j, e)| (j, e, raw[e] / total))
                    .collect(),
            );
        }
        Ok(Self { rows })
    }

    pub fn row(&self, node: usize) -> &[(usize, usize, f64)] {
        &self.rows[node]
    }

    pub fn weight(&self, i: usize, j: usize) -> Option<f64> {
        self.rows[i].iter().find(|r| r.0 == j).map(|r| r.2)
    }
}

/// `min(ŝ^(-exponent), 1e8)` for one edge.
pub fn capped_weight(level: f64, exponent: f64) -> f64 {
    if level <= 0.0 {
        return MAX_WEIGHT;
    }
    level.powf(-exponent).min(MAX_WEIGHT)
}

/// Weights from corruption estimates, `ŝ_ij^(-exponent)` capped at 1e8, then
/// normalized per node.
pub fn build_weight_matrix(
    graph: &ViewGraph,
    levels: &[f64],
    exponent: f64,
) -> Result<WeightedConnection, SpectralError> {
    if levels.len() != graph.num_edges() {
        return Err(SpectralError::LengthMismatch {
            expected: graph.num_edges(),
            got: levels.len(),
        });
    }
    let raw: Vec<f64> = levels.iter().map(|&s| capped_weight(s, exponent)).collect();
    WeightedConnection::from_edge_weights(graph, &raw)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralConfig {
    pub max_iters: usize,
    /// Stop when the subspace moves less than this between iterations.
    pub tol: f64,
}

impl Default for SpectralConfig {
    fn default() -> Self {
        Self {
            max_iters: 1000,
            tol: 1e-10,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SpectralSolution {
    pub rotations: Vec<Rotation>,
    pub iterations: usize,
    /// `‖XY − Y(YᵀXY)‖_F` at the returned subspace; large values mean a poorly
    /// separated dominant subspace.
    pub residual: f64,
}

fn apply(wc: &WeightedConnection, graph: &ViewGraph, y: &DMatrix<f64>) -> DMatrix<f64> {
    let n = graph.num_nodes();
    let mut out = DMatrix::zeros(3 * n, 3);
    for i in 0..n {
        let mut acc = Matrix3::zeros();
        for &(j, e, w) in wc.row(i) {
            let edge = graph.edge(e);
            let r_ij = if edge.i == i {
                *edge.rotation.matrix()
            } else {
                edge.rotation.matrix().transpose()
            };
            let yj = y.fixed_view::<3, 3>(3 * j, 0);
            acc += r_ij * yj * w;
        }
        out.fixed_view_mut::<3, 3>(3 * i, 0).copy_from(&acc);
    }
    out
}

fn orthonormalize(m: DMatrix<f64>) -> DMatrix<f64> {
    m.qr().q()
}

/// Dominant-subspace rotation recovery with the default iteration settings.
pub fn spectral_sync(
    wc: &WeightedConnection,
    graph: &ViewGraph,
) -> Result<SpectralSolution, SpectralError> {
    spectral_sync_with(wc, graph, &SpectralConfig::default())
}

/// Orthogonal iteration on `(X + I)/2` from a fixed pseudo-random start.
///
/// `X` is similar to a symmetric matrix with spectrum in `[-1, 1]`; the shift
/// keeps eigenvectors and makes the largest algebraic eigenvalues dominant,
/// so an eigenvalue near −1 (bipartite-like structure) cannot capture the
/// iteration.
pub fn spectral_sync_with(
    wc: &WeightedConnection,
    graph: &ViewGraph,
    cfg: &SpectralConfig,
) -> Result<SpectralSolution, SpectralError> {
    let n = graph.num_nodes();
    for node in 0..n {
        if wc.row(node).is_empty() {
            return Err(SpectralError::IsolatedNode(node));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let start = DMatrix::from_fn(3 * n, 3, |_, _| StandardNormal.sample(&mut rng));
    let mut y = orthonormalize(start);
    let mut iterations = 0;
    let mut converged = false;
    while iterations < cfg.max_iters {
        iterations += 1;
        let xy = apply(wc, graph, &y);
        let next = orthonormalize((xy + &y) * 0.5);
        let overlap = y.transpose() * &next;
        let change = (&next - &y * overlap).norm();
        y = next;
        if change <= cfg.tol {
            converged = true;
            break;
        }
    }
    let xy = apply(wc, graph, &y);
    let rayleigh = y.transpose() * &xy;
    let residual = (&xy - &y * rayleigh).norm();
    if !converged {
        return Err(SpectralError::NotConverged {
            iterations,
            residual,
        });
    }

    // The basis is defined up to an orthogonal 3x3 factor, possibly a reflection.
    let det_sum: f64 = (0..n)
        .map(|i| y.fixed_view::<3, 3>(3 * i, 0).determinant())
        .sum();
    if det_sum < 0.0 {
        y.column_mut(2).neg_mut();
    }
    let rotations = (0..n)
        .map(|i| project_to_so3(&y.fixed_view::<3, 3>(3 * i, 0).into_owned()))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(SpectralSolution {
        rotations,
        iterations,
        residual,
    })
}
