//! End-to-end experiment driver: corruption estimation, spectral
//! initialization, IRLS refinement, metrics and file artifacts.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cycles::{build_cycle_table, uncovered_edges, CycleBudget, CycleError, CycleTable};
use crate::eval::{self, EvalError, EvalReport};
use crate::graph::{GraphError, GroundTruth, ViewGraph};
use crate::io::{self, fmt_f64, IoError};
use crate::qp::{run_pgd_observed, CorruptionEstimate, PgdConfig, QpError};
use crate::refine::{refine_rotations, RefineConfig, RefineError, RefineMode, RefineSolution};
use crate::rotation::Rotation;
use crate::spectral::{build_weight_matrix, spectral_sync, SpectralError, SpectralSolution, WeightedConnection};
use crate::synth::{derive_seed, generate_ucm, SweepGrid, SynthError, UcmParams};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("input error: {0}")]
    Input(String),
    #[error(transparent)]
    Uncovered(#[from] CycleError),
    #[error("solver failure: {0}")]
    Solver(String),
    #[error("incomplete sweep: {} missing cell(s): {}", .0.len(), .0.join("; "))]
    IncompleteSweep(Vec<String>),
}

impl PipelineError {
    /// Process exit status for this failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Input(_) | PipelineError::IncompleteSweep(_) => 2,
            PipelineError::Solver(_) => 3,
            PipelineError::Uncovered(_) => 4,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            PipelineError::Input(_) => "input",
            PipelineError::Uncovered(_) => "uncovered_edges",
            PipelineError::Solver(_) => "solver",
            PipelineError::IncompleteSweep(_) => "incomplete_sweep",
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::json!({
            "error": self.kind(),
            "exit_code": self.exit_code(),
            "message": self.to_string(),
        })
        .to_string()
    }
}

macro_rules! solver_error {
    ($($t:ty),*) => {$(
        impl From<$t> for PipelineError {
            fn from(e: $t) -> Self {
                PipelineError::Solver(e.to_string())
            }
        }
    )*};
}
solver_error!(QpError, SpectralError, RefineError, EvalError);

impl From<IoError> for PipelineError {
    fn from(e: IoError) -> Self {
        PipelineError::Input(e.to_string())
    }
}

impl From<SynthError> for PipelineError {
    fn from(e: SynthError) -> Self {
        PipelineError::Input(e.to_string())
    }
}

impl From<GraphError> for PipelineError {
    fn from(e: GraphError) -> Self {
        PipelineError::Input(e.to_string())
    }
}

/// Solver knobs shared by `run` and `sweep`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub pgd: PgdConfig,
    pub refine: RefineConfig,
    pub budget: CycleBudget,
    pub gcw_exponent: f64,
    pub prune_uncovered: bool,
    pub seed: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            pgd: PgdConfig::default(),
            refine: RefineConfig::default(),
            budget: CycleBudget::default(),
            gcw_exponent: 1.5,
            prune_uncovered: false,
            seed: 0,
        }
    }
}

/// Named parameter profiles.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Profile {
    /// Step 0.01, 100 iterations.
    #[default]
    Synthetic,
    /// Step 1, 30 iterations, for large real-world graphs.
    Large,
}

impl SolverConfig {
    pub fn with_profile(profile: Profile) -> Self {
        let mut cfg = Self::default();
        if profile == Profile::Large {
            cfg.pgd = PgdConfig::large();
        }
        cfg
    }
}

/// Per-iteration corruption-estimation trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PgdTraceRow {
    pub iter: usize,
    pub objective: f64,
    pub mean_abs_err: Option<f64>,
    pub median_abs_err: Option<f64>,
}

/// Everything produced by one solve.
#[derive(Debug, Clone)]
pub struct SolveOutput {
    /// Graph actually solved (after optional pruning).
    pub graph: ViewGraph,
    /// Ids (in the input graph) of the edges that were kept.
    pub kept_edges: Vec<usize>,
    pub table: CycleTable,
    pub estimate: CorruptionEstimate,
    pub pgd_trace: Vec<PgdTraceRow>,
    pub init: SpectralSolution,
    pub refined: RefineSolution,
}

/// Removes edges on no 3-cycle until none remain.
pub fn prune_uncovered(graph: &ViewGraph) -> (ViewGraph, Vec<usize>) {
    let mut current = graph.clone();
    let mut kept: Vec<usize> = (0..graph.num_edges()).collect();
    loop {
        let drop = uncovered_edges(&current);
        if drop.is_empty() {
            return (current, kept);
        }
        let mut mask = vec![true; kept.len()];
        for &e in &drop {
            mask[e] = false;
        }
        kept = kept.into_iter().zip(mask).filter(|(_, k)| *k).map(|(e, _)| e).collect();
        current = current.without_edges(&drop);
    }
}

/// Corruption estimation, DESC-weighted spectral initialization and refinement.
pub fn solve(
    graph: &ViewGraph,
    cfg: &SolverConfig,
    truth: Option<&GroundTruth>,
) -> Result<SolveOutput, PipelineError> {
    let (graph, kept_edges) = if cfg.prune_uncovered {
        prune_uncovered(graph)
    } else {
        (graph.clone(), (0..graph.num_edges()).collect())
    };
    graph.check_connected()?;
    let truth_levels: Option<Vec<f64>> =
        truth.map(|t| kept_edges.iter().map(|&e| t.corruption[e]).collect());

    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, "cycles"));
    let table = build_cycle_table(&graph, cfg.budget, &mut rng)?;

    let mut pgd_trace = Vec::new();
    let record = cfg.pgd.record_trace;
    let mut objective_of = |iter: usize, state: &crate::qp::BeliefState| {
        if !record {
            return;
        }
        let (mean, median) = match &truth_levels {
            Some(t) => {
                let (a, b) = eval::corruption_error(state.levels(), t).expect("matching lengths");
                (Some(a), Some(b))
            }
            None => (None, None),
        };
        pgd_trace.push((iter, mean, median));
    };
    let estimate = run_pgd_observed(&table, &cfg.pgd, &mut objective_of)?;
    let pgd_trace = match &estimate.trace {
        Some(objectives) => pgd_trace
            .into_iter()
            .zip(objectives)
            .map(|((iter, mean, median), &objective)| PgdTraceRow {
                iter,
                objective,
                mean_abs_err: mean,
                median_abs_err: median,
            })
            .collect(),
        None => Vec::new(),
    };

    let wc = build_weight_matrix(&graph, &estimate.levels, cfg.gcw_exponent)?;
    let init = spectral_sync(&wc, &graph)?;
    let refine_cfg = RefineConfig {
        mode: RefineMode::Desc,
        ..cfg.refine
    };
    let refined = refine_rotations(&graph, &estimate.levels, &init.rotations, &refine_cfg)?;
    Ok(SolveOutput {
        graph,
        kept_edges,
        table,
        estimate,
        pgd_trace,
        init,
        refined,
    })
}

/// Spectral initialization with equal weights on every edge.
pub fn uniform_spectral(graph: &ViewGraph) -> Result<SpectralSolution, PipelineError> {
    let wc = WeightedConnection::uniform(graph)?;
    Ok(spectral_sync(&wc, graph)?)
}

/// Plain ℓ½ IRLS baseline started from the equal-weight spectral solution.
pub fn irls_baseline(graph: &ViewGraph, refine: &RefineConfig) -> Result<RefineSolution, PipelineError> {
    let init = uniform_spectral(graph)?;
    let cfg = RefineConfig {
        mode: RefineMode::IrlsHalf,
        ..*refine
    };
    let levels = vec![0.0; graph.num_edges()];
    Ok(refine_rotations(graph, &levels, &init.rotations, &cfg)?)
}

/// Where a `run` takes its instance from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InstanceSource {
    Ucm(UcmParams),
    Files {
        graph: PathBuf,
        truth: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub source: InstanceSource,
    pub solver: SolverConfig,
    pub out_dir: PathBuf,
    pub per_node_csv: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageSummary {
    pub iterations: usize,
    pub value: f64,
}

/// Contents of `report.json`. Holds no timing data, so identical runs produce
/// identical bytes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub num_nodes: usize,
    pub num_edges: usize,
    pub pruned_edges: usize,
    pub total_cycles: usize,
    pub pgd_iterations: usize,
    pub pgd_final_objective: f64,
    pub spectral_iterations: usize,
    pub spectral_residual: f64,
    pub refine_iterations: usize,
    pub refine_converged: bool,
    pub flagged_edges: Vec<usize>,
    pub mean_corruption_err: Option<f64>,
    pub median_corruption_err: Option<f64>,
    pub desc_init: Option<EvalReport>,
    pub desc: Option<EvalReport>,
}

fn load_instance(source: &InstanceSource) -> Result<(ViewGraph, Option<GroundTruth>), PipelineError> {
    match source {
        InstanceSource::Ucm(params) => {
            let inst = generate_ucm(params)?;
            Ok((inst.graph, Some(inst.truth)))
        }
        InstanceSource::Files { graph, truth } => {
            let truth_rots = truth
                .as_ref()
                .map(|p| io::read_to_string(p).and_then(|t| io::parse_rotations(&t)))
                .transpose()?;
            let min_nodes = truth_rots.as_ref().map_or(0, Vec::len);
            let g = io::parse_pose_graph(&io::read_to_string(graph)?, min_nodes)?;
            let truth = match truth_rots {
                Some(r) if r.len() != g.num_nodes() => {
                    return Err(PipelineError::Input(format!(
                        "truth has {} nodes, graph has {}",
                        r.len(),
                        g.num_nodes()
                    )))
                }
                Some(r) => Some(GroundTruth::from_rotations(&g, r)),
                None => None,
            };
            Ok((g, truth))
        }
    }
}

fn pgd_trace_csv(rows: &[PgdTraceRow]) -> String {
    let with_err = rows.first().is_some_and(|r| r.mean_abs_err.is_some());
    let mut out = String::from(if with_err {
        "iter,objective,mean_abs_err,median_abs_err\n"
    } else {
        "iter,objective\n"
    });
    for r in rows {
        let _ = write!(out, "{},{}", r.iter, fmt_f64(r.objective));
        if let (Some(a), Some(b)) = (r.mean_abs_err, r.median_abs_err) {
            let _ = write!(out, ",{},{}", fmt_f64(a), fmt_f64(b));
        }
        out.push('\n');
    }
    out
}

fn refine_trace_csv(sol: &RefineSolution) -> String {
    let mut out = String::from("iter,max_step_norm,mean_residual,truncated_count\n");
    for r in &sol.trace {
        let _ = writeln!(
            out,
            "{},{},{},{}",
            r.iter,
            fmt_f64(r.max_step_norm),
            fmt_f64(r.mean_residual),
            r.truncated_count
        );
    }
    out
}

fn per_node_csv(init: &EvalReport, desc: &EvalReport) -> String {
    let mut out = String::from("node,desc_init_err_deg,desc_err_deg\n");
    for (i, (a, b)) in init.per_node_err_deg.iter().zip(&desc.per_node_err_deg).enumerate() {
        let _ = writeln!(out, "{i},{},{}", fmt_f64(*a), fmt_f64(*b));
    }
    out
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable");
    s.push('\n');
    s
}

/// Runs the full method on one instance and writes its artifacts to `out_dir`:
/// `s_hat.csv`, `rotations.txt`, `init_rotations.txt`, `report.json`, the
/// iteration traces, and `manifest.json` (the only file with wall-clock data).
pub fn run_pipeline(cfg: &RunConfig) -> Result<RunReport, PipelineError> {
    let started = std::time::Instant::now();
    let (graph, truth) = load_instance(&cfg.source)?;
    let mut solver = cfg.solver;
    solver.pgd.record_trace = true;
    solver.refine.record_trace = true;
    let out = solve(&graph, &solver, truth.as_ref())?;

    let truth_levels: Option<Vec<f64>> = truth
        .as_ref()
        .map(|t| out.kept_edges.iter().map(|&e| t.corruption[e]).collect());
    let (mean_s, median_s) = match &truth_levels {
        Some(t) => {
            let (a, b) = eval::corruption_error(&out.estimate.levels, t)?;
            (Some(a), Some(b))
        }
        None => (None, None),
    };
    let (desc_init, desc) = match &truth {
        Some(t) => {
            let corr = truth_levels.as_deref().map(|tl| (out.estimate.levels.as_slice(), tl));
            (
                Some(EvalReport::new(&out.init.rotations, &t.rotations, corr)?),
                Some(EvalReport::new(&out.refined.rotations, &t.rotations, corr)?),
            )
        }
        None => (None, None),
    };
    let report = RunReport {
        num_nodes: out.graph.num_nodes(),
        num_edges: out.graph.num_edges(),
        pruned_edges: graph.num_edges() - out.graph.num_edges(),
        total_cycles: out.table.num_slots(),
        pgd_iterations: out.estimate.iterations,
        pgd_final_objective: out.estimate.final_objective,
        spectral_iterations: out.init.iterations,
        spectral_residual: out.init.residual,
        refine_iterations: out.refined.iterations,
        refine_converged: out.refined.converged,
        flagged_edges: out.refined.flagged_edges.clone(),
        mean_corruption_err: mean_s,
        median_corruption_err: median_s,
        desc_init,
        desc,
    };

    let dir = &cfg.out_dir;
    io::write_atomic(
        &dir.join("s_hat.csv"),
        &io::format_levels_csv(&out.graph, &out.estimate.levels, truth_levels.as_deref()),
    )?;
    io::write_atomic(&dir.join("rotations.txt"), &io::format_rotations(&out.refined.rotations))?;
    io::write_atomic(&dir.join("init_rotations.txt"), &io::format_rotations(&out.init.rotations))?;
    io::write_atomic(&dir.join("pgd_trace.csv"), &pgd_trace_csv(&out.pgd_trace))?;
    io::write_atomic(&dir.join("refine_trace.csv"), &refine_trace_csv(&out.refined))?;
    if cfg.per_node_csv {
        if let (Some(a), Some(b)) = (&report.desc_init, &report.desc) {
            io::write_atomic(&dir.join("node_errors.csv"), &per_node_csv(a, b))?;
        }
    }
    io::write_atomic(&dir.join("report.json"), &to_json(&report))?;
    let manifest = serde_json::json!({
        "config": cfg,
        "wall_time_secs": started.elapsed().as_secs_f64(),
        "finished_unix_secs": std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0),
    });
    io::write_atomic(&dir.join("manifest.json"), &to_json(&manifest))?;
    Ok(report)
}

/// Methods that a sweep can report.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Desc,
    DescInit,
    IrlsHalf,
    UniformGcw,
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Method::Desc => "desc",
            Method::DescInit => "desc-init",
            Method::IrlsHalf => "irls-l12",
            Method::UniformGcw => "uniform-gcw",
        }
    }
}

impl FromStr for Method {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "desc" => Ok(Method::Desc),
            "desc-init" => Ok(Method::DescInit),
            "irls-l12" => Ok(Method::IrlsHalf),
            "uniform-gcw" => Ok(Method::UniformGcw),
            other => Err(format!("unknown method {other:?}")),
        }
    }
}

/// One row of `sweep.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub q: f64,
    pub sigma: f64,
    pub seed: u64,
    pub method: Method,
    pub mean_err_deg: f64,
    pub median_err_deg: f64,
    pub mean_s_err: Option<f64>,
    pub median_s_err: Option<f64>,
}

pub const SWEEP_HEADER: &str = "q,sigma,seed,method,mean_err_deg,median_err_deg,mean_s_err,median_s_err";

/// Runs every requested method on one grid cell.
pub fn run_cell(params: &UcmParams, solver: &SolverConfig, methods: &[Method]) -> Result<Vec<SweepRow>, PipelineError> {
    let inst = generate_ucm(params)?;
    let needs_desc = methods.iter().any(|m| matches!(m, Method::Desc | Method::DescInit));
    let cfg = SolverConfig {
        seed: derive_seed(params.seed, "solver"),
        ..*solver
    };
    let out = if needs_desc {
        Some(solve(&inst.graph, &cfg, Some(&inst.truth))?)
    } else {
        None
    };
    let mut rows = Vec::new();
    for &method in methods {
        let (rotations, s_err): (Vec<Rotation>, Option<(f64, f64)>) = match method {
            Method::Desc | Method::DescInit => {
                let out = out.as_ref().expect("solved above");
                let truth: Vec<f64> = out.kept_edges.iter().map(|&e| inst.truth.corruption[e]).collect();
                let s = eval::corruption_error(&out.estimate.levels, &truth)?;
                let rots = if method == Method::Desc {
                    out.refined.rotations.clone()
                } else {
                    out.init.rotations.clone()
                };
                (rots, Some(s))
            }
            Method::IrlsHalf => (irls_baseline(&inst.graph, &solver.refine)?.rotations, None),
            Method::UniformGcw => (uniform_spectral(&inst.graph)?.rotations, None),
        };
        let stats = eval::rotation_error_stats(&rotations, &inst.truth.rotations)?;
        rows.push(SweepRow {
            q: params.q,
            sigma: params.sigma,
            seed: params.seed,
            method,
            mean_err_deg: stats.mean_deg,
            median_err_deg: stats.median_deg,
            mean_s_err: s_err.map(|s| s.0),
            median_s_err: s_err.map(|s| s.1),
        });
    }
    Ok(rows)
}

fn opt(x: Option<f64>) -> String {
    x.map(fmt_f64).unwrap_or_default()
}

pub fn format_sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = format!("{SWEEP_HEADER}\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            fmt_f64(r.q),
            fmt_f64(r.sigma),
            r.seed,
            r.method.name(),
            fmt_f64(r.mean_err_deg),
            fmt_f64(r.median_err_deg),
            opt(r.mean_s_err),
            opt(r.median_s_err)
        );
    }
    out
}

pub fn parse_sweep_csv(text: &str) -> Result<Vec<SweepRow>, PipelineError> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h.trim() == SWEEP_HEADER => {}
        _ => return Err(PipelineError::Input("sweep CSV header mismatch".into())),
    }
    let bad = |line: usize, what: &str| PipelineError::Input(format!("sweep CSV line {line}: {what}"));
    let num = |s: &str, line: usize| s.parse::<f64>().map_err(|_| bad(line, "bad number"));
    let mut rows = Vec::new();
    for (idx, line) in lines.enumerate() {
        let line_no = idx + 2;
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 8 {
            return Err(bad(line_no, "expected 8 columns"));
        }
        let optional = |s: &str| -> Result<Option<f64>, PipelineError> {
            if s.is_empty() {
                Ok(None)
            } else {
                num(s, line_no).map(Some)
            }
        };
        rows.push(SweepRow {
            q: num(f[0], line_no)?,
            sigma: num(f[1], line_no)?,
            seed: f[2].parse().map_err(|_| bad(line_no, "bad seed"))?,
            method: f[3].parse().map_err(|e: String| bad(line_no, &e))?,
            mean_err_deg: num(f[4], line_no)?,
            median_err_deg: num(f[5], line_no)?,
            mean_s_err: optional(f[6])?,
            median_s_err: optional(f[7])?,
        });
    }
    Ok(rows)
}

/// Grid plus methods; written next to `sweep.csv` so plotting can check completeness.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepManifest {
    pub grid: SweepGrid,
    pub methods: Vec<Method>,
}

/// Runs every cell (in parallel across cells) and returns rows in grid order.
pub fn run_sweep(
    grid: &SweepGrid,
    solver: &SolverConfig,
    methods: &[Method],
) -> Result<Vec<SweepRow>, PipelineError> {
    let per_cell: Vec<Result<Vec<SweepRow>, PipelineError>> = grid
        .cells()
        .par_iter()
        .map(|params| run_cell(params, solver, methods))
        .collect();
    let mut rows = Vec::new();
    for cell in per_cell {
        rows.extend(cell?);
    }
    Ok(rows)
}

/// Runs a sweep and writes `sweep.csv`, `sweep_manifest.json` and the figure CSVs.
pub fn run_sweep_to_dir(
    grid: &SweepGrid,
    solver: &SolverConfig,
    methods: &[Method],
    out_dir: &Path,
) -> Result<Vec<SweepRow>, PipelineError> {
    let rows = run_sweep(grid, solver, methods)?;
    io::write_atomic(&out_dir.join("sweep.csv"), &format_sweep_csv(&rows))?;
    let manifest = SweepManifest {
        grid: grid.clone(),
        methods: methods.to_vec(),
    };
    io::write_atomic(&out_dir.join("sweep_manifest.json"), &to_json(&manifest))?;
    for (name, body) in emit_plot_data(&rows, &manifest)? {
        io::write_atomic(&out_dir.join(name), &body)?;
    }
    Ok(rows)
}

fn same(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12
}

fn log10_text(v: f64) -> String {
    if v > 0.0 {
        fmt_f64(v.log10())
    } else {
        "-inf".to_string()
    }
}

/// Figure tables from sweep rows: for each noise level, one file of mean and one of
/// median rotation errors versus `q`, averaged over seeds, with `log10_value` for
/// log-scale axes. Fails listing every `(q, σ, seed)` cell without a full set of rows.
pub fn emit_plot_data(
    rows: &[SweepRow],
    manifest: &SweepManifest,
) -> Result<Vec<(String, String)>, PipelineError> {
    let grid = &manifest.grid;
    let mut missing = Vec::new();
    for cell in grid.cells() {
        let complete = manifest.methods.iter().all(|m| {
            rows.iter().any(|r| {
                r.method == *m && r.seed == cell.seed && same(r.q, cell.q) && same(r.sigma, cell.sigma)
            })
        });
        if !complete {
            missing.push(format!("q={},sigma={},seed={}", cell.q, cell.sigma, cell.seed));
        }
    }
    if !missing.is_empty() {
        return Err(PipelineError::IncompleteSweep(missing));
    }

    let mut files = Vec::new();
    for &sigma in &grid.sigma {
        for (stat, pick) in [
            ("mean", (|r: &SweepRow| r.mean_err_deg) as fn(&SweepRow) -> f64),
            ("median", |r: &SweepRow| r.median_err_deg),
        ] {
            let mut body = String::from("q,method,value,log10_value\n");
            for &q in &grid.q {
                for m in &manifest.methods {
                    let mut acc: HashMap<u64, f64> = HashMap::new();
                    for r in rows.iter().filter(|r| {
                        r.method == *m && same(r.q, q) && same(r.sigma, sigma) && grid.seeds.contains(&r.seed)
                    }) {
                        acc.insert(r.seed, pick(r));
                    }
                    let ordered: BTreeMap<_, _> = acc.into_iter().collect();
                    let vals: Vec<f64> = ordered.into_values().collect();
                    let v = eval::mean(&vals);
                    let _ = writeln!(body, "{},{},{},{}", fmt_f64(q), m.name(), fmt_f64(v), log10_text(v));
                }
            }
            files.push((format!("fig_rotation_{stat}_sigma_{sigma}.csv"), body));
        }
    }
    Ok(files)
}

/// Parses `n=100,p=0.5,q=0.5,sigma=0`; missing keys keep their defaults
/// (`n=100, p=0.5, q=0, sigma=0`).
pub fn parse_ucm_params(text: &str, seed: u64) -> Result<UcmParams, String> {
    let mut params = UcmParams {
        n: 100,
        p: 0.5,
        q: 0.0,
        sigma: 0.0,
        seed,
    };
    for part in text.split(',').filter(|s| !s.trim().is_empty()) {
        let (k, v) = part
            .split_once('=')
            .ok_or_else(|| format!("expected key=value, got {part:?}"))?;
        let v = v.trim();
        let bad = || format!("bad value for {k}: {v:?}");
        match k.trim() {
            "n" => params.n = v.parse().map_err(|_| bad())?,
            "p" => params.p = v.parse().map_err(|_| bad())?,
            "q" => params.q = v.parse().map_err(|_| bad())?,
            "sigma" => params.sigma = v.parse().map_err(|_| bad())?,
            other => return Err(format!("unknown key {other:?}")),
        }
    }
    params.validate().map_err(|e| e.to_string())?;
    Ok(params)
}
