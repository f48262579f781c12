//! Rotation synchronization with cycle-consistent corruption estimation.
//!
//! The pipeline estimates a corruption level for every edge of a view graph by
//! minimizing a cycle-consistency quadratic program over per-edge simplices,
//! turns those levels into weights for a spectral initialization on SO(3), and
//! refines the result with reweighted least squares in the tangent space.
//!
//! ```no_run
//! use desc_sync::pipeline::{solve, SolverConfig};
//! use desc_sync::synth::{generate_ucm, UcmParams};
//!
//! let inst = generate_ucm(&UcmParams { n: 100, p: 0.5, q: 0.3, sigma: 0.0, seed: 1 }).unwrap();
//! let out = solve(&inst.graph, &SolverConfig::default(), Some(&inst.truth)).unwrap();
//! println!("{} rotations", out.refined.rotations.len());
//! ```

pub mod cycles;
pub mod eval;
pub mod graph;
pub mod io;
pub mod pipeline;
pub mod qp;
pub mod refine;
pub mod rotation;
pub mod simplex;
pub mod spectral;
pub mod synth;

pub use cycles::{build_cycle_table, CycleBudget, CycleTable};
pub use graph::{GroundTruth, ViewGraph};
pub use pipeline::{solve, PipelineError, SolverConfig};
pub use qp::{run_pgd, CorruptionEstimate, PgdConfig};
pub use refine::{refine_rotations, RefineConfig, RefineMode};
pub use rotation::{project_to_so3, Rotation, TangentVector};
pub use spectral::{build_weight_matrix, spectral_sync};
pub use synth::{generate_ucm, UcmParams};
