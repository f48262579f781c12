//! The cycle-consistency quadratic program over per-edge simplices and its
//! projected gradient descent solver.
//!
//! Each edge `ij` carries a belief `p_ij` over its sampled 3-cycles and the
//! induced corruption estimate `s_ij = p_ijᵀ d_ij`. The objective is
//!
//! ```text
//! f(p) = Σ_ij Σ_{k ∈ C_ij} p_ij(k) (s_ik + s_jk)
//! ```
//!
//! which is small when each edge puts its mass on cycles whose other two edges
//! look clean.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cycles::CycleTable;
use crate::simplex::project_to_simplex_into;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QpError {
    #[error("edge {0} has an empty cycle set")]
    EmptyCycleSet(usize),
    #[error("belief state does not match the cycle table ({0})")]
    Mismatch(&'static str),
    #[error("non-finite {what} at iteration {iter}")]
    NonFinite { what: &'static str, iter: usize },
    #[error("invalid solver configuration: {0}")]
    Config(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PgdConfig {
    pub step_size: f64,
    pub max_iters: usize,
    pub record_trace: bool,
}

impl Default for PgdConfig {
    fn default() -> Self {
        Self {
            step_size: 0.01,
            max_iters: 100,
            record_trace: false,
        }
    }
}

impl PgdConfig {
    /// Parameters for large real-world graphs.
    pub fn large() -> Self {
        Self {
            step_size: 1.0,
            max_iters: 30,
            record_trace: false,
        }
    }

    pub fn validate(&self) -> Result<(), QpError> {
        if !(self.step_size > 0.0 && self.step_size <= 10.0) {
            return Err(QpError::Config(format!(
                "step size {} outside (0, 10]",
                self.step_size
            )));
        }
        if self.max_iters == 0 {
            return Err(QpError::Config("max_iters must be at least 1".into()));
        }
        Ok(())
    }
}

/// Per-edge beliefs `p_ij`, flattened with the cycle table's layout, and `s_ij`.
#[derive(Debug, Clone, PartialEq)]
pub struct BeliefState {
    offsets: Vec<usize>,
    p: Vec<f64>,
    s: Vec<f64>,
}

impl BeliefState {
    /// Wraps flat beliefs and recomputes `s = pᵀd`.
    pub fn from_flat(table: &CycleTable, p: Vec<f64>) -> Result<Self, QpError> {
        if p.len() != table.num_slots() {
            return Err(QpError::Mismatch("belief length"));
        }
        let s = induced_levels(table, &p);
        Ok(Self {
            offsets: table.offsets().to_vec(),
            p,
            s,
        })
    }

    pub fn num_edges(&self) -> usize {
        self.s.len()
    }

    pub fn belief(&self, e: usize) -> &[f64] {
        &self.p[self.offsets[e]..self.offsets[e + 1]]
    }

    pub fn flat(&self) -> &[f64] {
        &self.p
    }

    pub fn levels(&self) -> &[f64] {
        &self.s
    }

    fn matches(&self, table: &CycleTable) -> bool {
        self.offsets == table.offsets()
    }
}

fn induced_levels(table: &CycleTable, p: &[f64]) -> Vec<f64> {
    let d = table.all_inconsistencies();
    (0..table.num_edges())
        .map(|e| {
            table
                .slots(e)
                .map(|slot| p[slot] * d[slot])
                .sum::<f64>()
        })
        .collect()
}

/// Output of [`run_pgd`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorruptionEstimate {
    /// `ŝ_ij` per edge id, in `[0, 1]`.
    pub levels: Vec<f64>,
    pub iterations: usize,
    pub final_objective: f64,
    /// Objective before the first step and after every iteration, when requested.
    pub trace: Option<Vec<f64>>,
}

/// Uniform beliefs `p_ij = 1/|C_ij|`.
pub fn init_beliefs(table: &CycleTable) -> Result<BeliefState, QpError> {
    let mut p = Vec::with_capacity(table.num_slots());
    for e in 0..table.num_edges() {
        let m = table.len_of(e);
        if m == 0 {
            return Err(QpError::EmptyCycleSet(e));
        }
        p.extend(std::iter::repeat_n(1.0 / m as f64, m));
    }
    BeliefState::from_flat(table, p)
}

/// Neumaier-compensated sum.
fn compensated_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let mut sum = 0.0;
    let mut c = 0.0;
    for x in values {
        let t = sum + x;
        if sum.abs() >= x.abs() {
            c += (sum - t) + x;
        } else {
            c += (x - t) + sum;
        }
        sum = t;
    }
    sum + c
}

/// `Σ_ij Σ_k p_ij(k)(s_ik + s_jk)`.
pub fn objective(b: &BeliefState, table: &CycleTable) -> Result<f64, QpError> {
    if !b.matches(table) {
        return Err(QpError::Mismatch("cycle layout"));
    }
    Ok(objective_unchecked(b, table))
}

fn objective_unchecked(b: &BeliefState, table: &CycleTable) -> f64 {
    let per_edge: Vec<f64> = (0..table.num_edges())
        .into_par_iter()
        .map(|e| edge_objective(b, table, e))
        .collect();
    compensated_sum(per_edge)
}

fn edge_objective(b: &BeliefState, table: &CycleTable, e: usize) -> f64 {
    compensated_sum(table.slots(e).map(|slot| {
        let (ik, jk) = table.slot_edges(slot);
        b.p[slot] * (b.s[ik] + b.s[jk])
    }))
}

/// Total belief mass that other edges put on triangles containing `e`.
///
/// This is the coefficient of `d_ij` in the gradient: the sum of `p_il(j)` and
/// `p_jl(i)` over every stored cycle of another edge that passes through `ij`.
/// Cycles absent from the sampled table contribute nothing.
fn incident_mass(b: &BeliefState, table: &CycleTable, e: usize) -> f64 {
    table.incident_slots(e).iter().map(|&slot| b.p[slot]).sum()
}

/// `∂f/∂p_ij(k) = s_ik + s_jk + M_ij d_ij,k` for every `k ∈ C_ij`.
pub fn gradient(b: &BeliefState, table: &CycleTable, e: usize) -> Vec<f64> {
    let mass = incident_mass(b, table, e);
    let d = table.all_inconsistencies();
    table
        .slots(e)
        .map(|slot| {
            let (ik, jk) = table.slot_edges(slot);
            b.s[ik] + b.s[jk] + mass * d[slot]
        })
        .collect()
}

pub use crate::simplex::riemannian_project;

/// One synchronous sweep: every edge steps against the same previous iterate.
fn pgd_step(b: &BeliefState, table: &CycleTable, step: f64) -> Vec<f64> {
    let per_edge: Vec<Vec<f64>> = (0..table.num_edges())
        .into_par_iter()
        .map(|e| {
            let g = gradient(b, table, e);
            let mean = g.iter().sum::<f64>() / g.len() as f64;
            let moved: Vec<f64> = b
                .belief(e)
                .iter()
                .zip(&g)
                .map(|(p, gk)| p - step * (gk - mean))
                .collect();
            let mut out = vec![0.0; moved.len()];
            project_to_simplex_into(&moved, &mut out);
            out
        })
        .collect();
    per_edge.into_iter().flatten().collect()
}

/// Runs projected gradient descent for exactly `cfg.max_iters` iterations.
pub fn run_pgd(table: &CycleTable, cfg: &PgdConfig) -> Result<CorruptionEstimate, QpError> {
    run_pgd_observed(table, cfg, |_, _| {})
}

/// [`run_pgd`] with a callback invoked on the initial state (iteration 0) and
/// after every iteration.
pub fn run_pgd_observed<F>(
    table: &CycleTable,
    cfg: &PgdConfig,
    mut observer: F,
) -> Result<CorruptionEstimate, QpError>
where
    F: FnMut(usize, &BeliefState),
{
    cfg.validate()?;
    let mut state = init_beliefs(table)?;
    let mut trace = cfg.record_trace.then(Vec::new);
    let mut f = objective_unchecked(&state, table);
    if !f.is_finite() {
        return Err(QpError::NonFinite {
            what: "objective",
            iter: 0,
        });
    }
    if let Some(t) = trace.as_mut() {
        t.push(f);
    }
    observer(0, &state);

    for iter in 1..=cfg.max_iters {
        let p = pgd_step(&state, table, cfg.step_size);
        if p.iter().any(|x| !x.is_finite()) {
            return Err(QpError::NonFinite {
                what: "gradient",
                iter,
            });
        }
        state = BeliefState::from_flat(table, p)?;
        f = objective_unchecked(&state, table);
        if !f.is_finite() {
            return Err(QpError::NonFinite {
                what: "objective",
                iter,
            });
        }
        if let Some(t) = trace.as_mut() {
            t.push(f);
        }
        observer(iter, &state);
    }

    Ok(CorruptionEstimate {
        levels: state.s.iter().map(|s| s.clamp(0.0, 1.0)).collect(),
        iterations: cfg.max_iters,
        final_objective: f,
        trace,
    })
}
