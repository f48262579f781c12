//! Independent reference computations shared by the integration tests.
#![allow(dead_code)]

use desc_sync::cycles::CycleTable;
use desc_sync::graph::ViewGraph;
use desc_sync::rotation::Rotation;
use desc_sync::synth::{generate_ucm, UcmInstance, UcmParams};
use nalgebra::{DMatrix, Matrix3};

pub fn ucm(n: usize, p: f64, q: f64, sigma: f64, seed: u64) -> UcmInstance {
    generate_ucm(&UcmParams { n, p, q, sigma, seed }).expect("connected instance")
}

/// Geodesic angle over π through the textbook clamped arccos.
pub fn arccos_distance(a: &Matrix3<f64>, b: &Matrix3<f64>) -> f64 {
    let c = ((a.transpose() * b).trace() - 1.0) / 2.0;
    c.clamp(-1.0, 1.0).acos() / std::f64::consts::PI
}

/// Euclidean projection onto the simplex by enumerating every support set and
/// keeping the closest feasible stationary point.
pub fn simplex_projection_kkt(v: &[f64]) -> Vec<f64> {
    let m = v.len();
    let mut best: Option<(f64, Vec<f64>)> = None;
    for mask in 1u32..(1 << m) {
        let support: Vec<usize> = (0..m).filter(|k| mask & (1 << k) != 0).collect();
        let tau = (support.iter().map(|&k| v[k]).sum::<f64>() - 1.0) / support.len() as f64;
        let mut p = vec![0.0; m];
        let mut feasible = true;
        for &k in &support {
            p[k] = v[k] - tau;
            if p[k] < -1e-15 {
                feasible = false;
            }
        }
        if !feasible {
            continue;
        }
        let dist: f64 = p.iter().zip(v).map(|(a, b)| (a - b) * (a - b)).sum();
        if best.as_ref().is_none_or(|(d, _)| dist < *d) {
            best = Some((dist, p));
        }
    }
    best.expect("some support is always feasible").1
}

/// Objective recomputed slot by slot from the table, without the library's summation.
pub fn naive_objective(table: &CycleTable, p: &[f64]) -> f64 {
    let d = table.all_inconsistencies();
    let s: Vec<f64> = (0..table.num_edges())
        .map(|e| table.slots(e).map(|k| p[k] * d[k]).sum())
        .collect();
    (0..table.num_slots())
        .map(|k| {
            let (ik, jk) = table.slot_edges(k);
            p[k] * (s[ik] + s[jk])
        })
        .sum()
}

/// Minimum-norm least-squares node vectors for `Σ w ‖x_i − x_j − v_ij‖²` through
/// the dense pseudoinverse of the weighted Laplacian.
pub fn dense_tangent_ls(graph: &ViewGraph, weights: &[f64], v: &[[f64; 3]]) -> Vec<[f64; 3]> {
    let n = graph.num_nodes();
    let mut lap = DMatrix::<f64>::zeros(n, n);
    let mut rhs = DMatrix::<f64>::zeros(n, 3);
    for (id, e) in graph.edges().iter().enumerate() {
        let w = weights[id];
        lap[(e.i, e.i)] += w;
        lap[(e.j, e.j)] += w;
        lap[(e.i, e.j)] -= w;
        lap[(e.j, e.i)] -= w;
        for c in 0..3 {
            rhs[(e.i, c)] += w * v[id][c];
            rhs[(e.j, c)] -= w * v[id][c];
        }
    }
    let x = lap.pseudo_inverse(1e-12).expect("pseudoinverse") * rhs;
    (0..n).map(|i| [x[(i, 0)], x[(i, 1)], x[(i, 2)]]).collect()
}

/// Coefficient of determination of the least-squares line through `(x, y)`.
pub fn linear_r2(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let syy: f64 = y.iter().map(|b| (b - my) * (b - my)).sum();
    sxy * sxy / (sxx * syy)
}

/// Right-multiplies every rotation by `g`.
pub fn regauge(rotations: &[Rotation], g: &Rotation) -> Vec<Rotation> {
    rotations.iter().map(|r| *r * *g).collect()
}

/// Graph with the given edges measured exactly from `truth`.
pub fn consistent_graph(truth: &[Rotation], pairs: &[(usize, usize)]) -> ViewGraph {
    ViewGraph::new(
        truth.len(),
        pairs.iter().map(|&(i, j)| (i, j, truth[i] * truth[j].transpose())),
    )
    .unwrap()
}
