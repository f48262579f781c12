use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use desc_sync::cycles::CycleBudget;
use desc_sync::eval::EvalReport;
use desc_sync::io;
use desc_sync::pipeline::{
    emit_plot_data, parse_sweep_csv, parse_ucm_params, run_pipeline, run_sweep_to_dir, InstanceSource, Method,
    PipelineError, Profile, RunConfig, SolverConfig, SweepManifest,
};
use desc_sync::synth::{generate_ucm, grid_range, SweepGrid};

#[derive(Parser)]
#[command(name = "desc", version, about = "Robust rotation synchronization")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw a synthetic instance and write graph.txt, truth.txt and manifest.json.
    Generate {
        /// Model parameters, e.g. `n=100,p=0.5,q=0.3,sigma=0`.
        #[arg(long)]
        ucm: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the full method on one instance.
    Run(RunArgs),
    /// Run a grid of synthetic instances.
    Sweep(SweepArgs),
    /// Score estimated rotations against ground truth.
    Eval {
        #[arg(long)]
        estimate: PathBuf,
        #[arg(long)]
        truth: PathBuf,
    },
    /// Rebuild figure tables from an existing sweep directory.
    Plot {
        /// Directory holding sweep.csv and sweep_manifest.json.
        #[arg(long)]
        sweep: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum ProfileArg {
    Synthetic,
    Large,
}

#[derive(Args)]
struct SolverArgs {
    #[arg(long, value_enum, default_value = "synthetic")]
    profile: ProfileArg,
    /// Overrides the profile's step size.
    #[arg(long)]
    step: Option<f64>,
    /// Overrides the profile's iteration count.
    #[arg(long)]
    pgd_iters: Option<usize>,
    /// Minimum number of sampled 3-cycles per edge.
    #[arg(long, default_value_t = 30)]
    cycle_min: usize,
    /// Keep every 3-cycle instead of sampling.
    #[arg(long)]
    all_cycles: bool,
    #[arg(long, default_value_t = 1.5)]
    gcw_exponent: f64,
    #[arg(long, default_value_t = 100)]
    refine_iters: usize,
    #[arg(long, default_value_t = 1e-3)]
    refine_tol: f64,
    /// Drop edges on no 3-cycle instead of failing.
    #[arg(long)]
    prune_uncovered: bool,
}

impl SolverArgs {
    fn to_config(&self, seed: u64) -> SolverConfig {
        let profile = match self.profile {
            ProfileArg::Synthetic => Profile::Synthetic,
            ProfileArg::Large => Profile::Large,
        };
        let mut cfg = SolverConfig::with_profile(profile);
        if let Some(step) = self.step {
            cfg.pgd.step_size = step;
        }
        if let Some(iters) = self.pgd_iters {
            cfg.pgd.max_iters = iters;
        }
        cfg.budget = if self.all_cycles {
            CycleBudget::All
        } else {
            CycleBudget::MedianQuarter { min: self.cycle_min }
        };
        cfg.gcw_exponent = self.gcw_exponent;
        cfg.refine.max_iters = self.refine_iters;
        cfg.refine.convergence_tol = self.refine_tol;
        cfg.prune_uncovered = self.prune_uncovered;
        cfg.seed = seed;
        cfg
    }
}

#[derive(Args)]
struct RunArgs {
    /// Synthetic instance, e.g. `n=100,p=0.5,q=0.5,sigma=0`.
    #[arg(long, conflicts_with = "input")]
    ucm: Option<String>,
    /// Pose graph file with `EDGE i j r11 … r33` lines.
    #[arg(long)]
    input: Option<PathBuf>,
    /// Ground-truth rotations (`NODE i r11 … r33`) for `--input`.
    #[arg(long, requires = "input")]
    truth: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    solver: SolverArgs,
    /// Also write per-node errors.
    #[arg(long)]
    per_node_csv: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SweepArgs {
    /// `start:step:end` or a comma list.
    #[arg(long, default_value = "0:0.1:0.8")]
    q: String,
    #[arg(long, default_value = "0,0.1")]
    sigma: String,
    /// Number of seeds per cell (seeds 0..N).
    #[arg(long, default_value_t = 10)]
    seeds: u64,
    #[arg(long, default_value_t = 100)]
    n: usize,
    #[arg(long, default_value_t = 0.5)]
    p: f64,
    /// Comma list from desc, desc-init, irls-l12, uniform-gcw.
    #[arg(long, default_value = "desc")]
    methods: String,
    #[command(flatten)]
    solver: SolverArgs,
    #[arg(long)]
    out: PathBuf,
}

fn parse_values(text: &str) -> Result<Vec<f64>, PipelineError> {
    let bad = || PipelineError::Input(format!("bad value list {text:?}"));
    let parts: Vec<&str> = text.split(':').collect();
    if parts.len() == 3 {
        let v: Vec<f64> = parts
            .iter()
            .map(|s| s.trim().parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|_| bad())?;
        return Ok(grid_range(v[0], v[1], v[2]));
    }
    text.split(',')
        .map(|s| s.trim().parse::<f64>().map_err(|_| bad()))
        .collect()
}

fn execute(cli: Cli) -> Result<(), PipelineError> {
    match cli.command {
        Command::Generate { ucm, seed, out } => {
            let params = parse_ucm_params(&ucm, seed).map_err(PipelineError::Input)?;
            let inst = generate_ucm(&params)?;
            io::write_atomic(&out.join("graph.txt"), &io::format_pose_graph(&inst.graph))?;
            io::write_atomic(&out.join("truth.txt"), &io::format_rotations(&inst.truth.rotations))?;
            let manifest = serde_json::to_string_pretty(&inst.manifest()).expect("serializable");
            io::write_atomic(&out.join("manifest.json"), &format!("{manifest}\n"))?;
            println!("wrote {} edges to {}", inst.graph.num_edges(), out.display());
        }
        Command::Run(args) => {
            let source = match (&args.ucm, &args.input) {
                (Some(text), None) => {
                    InstanceSource::Ucm(parse_ucm_params(text, args.seed).map_err(PipelineError::Input)?)
                }
                (None, Some(graph)) => InstanceSource::Files {
                    graph: graph.clone(),
                    truth: args.truth.clone(),
                },
                _ => return Err(PipelineError::Input("give exactly one of --ucm or --input".into())),
            };
            let cfg = RunConfig {
                source,
                solver: args.solver.to_config(args.seed),
                out_dir: args.out.clone(),
                per_node_csv: args.per_node_csv,
            };
            let report = run_pipeline(&cfg)?;
            match &report.desc {
                Some(d) => println!(
                    "mean {:.4} deg, median {:.4} deg ({} nodes, {} edges)",
                    d.mean_rotation_err_deg, d.median_rotation_err_deg, report.num_nodes, report.num_edges
                ),
                None => println!("solved {} nodes, {} edges", report.num_nodes, report.num_edges),
            }
        }
        Command::Sweep(args) => {
            let grid = SweepGrid {
                n: args.n,
                p: args.p,
                q: parse_values(&args.q)?,
                sigma: parse_values(&args.sigma)?,
                seeds: (0..args.seeds).collect(),
            };
            let methods: Vec<Method> = args
                .methods
                .split(',')
                .map(|m| m.trim().parse().map_err(PipelineError::Input))
                .collect::<Result<_, _>>()?;
            let rows = run_sweep_to_dir(&grid, &args.solver.to_config(0), &methods, &args.out)?;
            println!("{} rows written to {}", rows.len(), args.out.display());
        }
        Command::Eval { estimate, truth } => {
            let est = io::parse_rotations(&io::read_to_string(&estimate)?)?;
            let tru = io::parse_rotations(&io::read_to_string(&truth)?)?;
            let report = EvalReport::new(&est, &tru, None).map_err(|e| PipelineError::Input(e.to_string()))?;
            println!("{}", serde_json::to_string_pretty(&report).expect("serializable"));
        }
        Command::Plot { sweep, out } => {
            let rows = parse_sweep_csv(&io::read_to_string(&sweep.join("sweep.csv"))?)?;
            let manifest: SweepManifest =
                serde_json::from_str(&io::read_to_string(&sweep.join("sweep_manifest.json"))?)
                    .map_err(|e| PipelineError::Input(format!("sweep_manifest.json: {e}")))?;
            let dir = out.unwrap_or(sweep);
            for (name, body) in emit_plot_data(&rows, &manifest)? {
                io::write_atomic(&dir.join(&name), &body)?;
                println!("{}", dir.join(name).display());
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

