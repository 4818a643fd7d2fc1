//! `dald` command-line harness: run ALM/BCD/DALD on built-in, file-backed,
//! or generated problems, sweep the inner-loop cap, generate network-flow
//! instances, and validate plans against problems.

mod config;

use std::path::PathBuf;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use config::{CliError, CliResult, ExperimentConfig, Method, PlanSource, ProblemSource};
use dald_core::coordination::{es_sweep_plan, network_from_matrix, validate_stage_coupling, HierarchicalMatrix};
use dald_core::driver::{run_alm, run_bcd, run_dald, RunStatus, RunTrace, StopCriterion};
use dald_core::model::ProblemFile;
use dald_core::problems::lnf_generate;
use dald_core::solvers::SolverKind;

#[derive(Parser)]
#[command(name = "dald", version, about = "Distributed augmented Lagrangian decomposition runner")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment and write trace.csv + summary.json.
    Run(RunArgs),
    /// Run a grid of (v_max, seed) cells and write sweep.csv.
    SweepVmax(SweepArgs),
    /// Generate a linear network flow instance.
    GenLnf(GenArgs),
    /// Validate a hierarchical matrix against a problem's coupling.
    Validate(ValidateArgs),
}

#[derive(Args, Clone)]
struct CommonArgs {
    /// JSON config file (a previous run's summary.json also works); flags
    /// override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Builtin name (`counterexample`, `toy`), a problem JSON path, or `lnf`.
    #[arg(long)]
    problem: Option<String>,
    /// Grid rows for `--problem lnf`.
    #[arg(long)]
    rows: Option<usize>,
    /// Grid columns for `--problem lnf`.
    #[arg(long)]
    cols: Option<usize>,
    /// Partition count for `--problem lnf`.
    #[arg(long)]
    parts: Option<usize>,
    /// Instance seed for `--problem lnf`.
    #[arg(long)]
    seed: Option<u64>,
    /// dald | alm | bcd.
    #[arg(long)]
    method: Option<Method>,
    /// Inner-loop criterion: B1, B2, B3, or B4.
    #[arg(long)]
    criterion: Option<String>,
    /// Sweep cap for B4.
    #[arg(long)]
    vmax: Option<usize>,
    /// Initial tolerance for B2.
    #[arg(long)]
    b2_initial: Option<f64>,
    /// Decay factor for B2.
    #[arg(long)]
    b2_decay: Option<f64>,
    /// Initial sweep cap for B3.
    #[arg(long)]
    b3_initial: Option<usize>,
    /// Cap growth factor for B3.
    #[arg(long)]
    b3_growth: Option<f64>,
    #[arg(long)]
    eps_pri: Option<f64>,
    #[arg(long)]
    eps_dual: Option<f64>,
    #[arg(long)]
    max_outer: Option<usize>,
    /// Total sweep budget across outer iterations.
    #[arg(long)]
    max_inner: Option<usize>,
    /// projected-gradient | analytic-linear.
    #[arg(long)]
    solver: Option<String>,
    /// Projected-gradient stationarity tolerance.
    #[arg(long)]
    solver_tol: Option<f64>,
    /// Initial penalty rho (one value for all constraints).
    #[arg(long)]
    rho: Option<f64>,
    /// Geometric penalty growth beta.
    #[arg(long)]
    rho_growth: Option<f64>,
    /// Comma-separated initial point, e.g. `--x0 1,1,1`.
    #[arg(long)]
    x0: Option<String>,
    /// Plan source: `chain` or a matrix JSON path.
    #[arg(long)]
    plan: Option<String>,
    /// Seed for randomized coordination modes.
    #[arg(long)]
    plan_seed: Option<u64>,
    /// Output directory (resolved against $DALD_OUT_DIR when relative).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Comma-separated v_max values, e.g. `--vmax-list 1,2,4,8`.
    #[arg(long)]
    vmax_list: String,
    /// Comma-separated instance seeds (defaults to the configured seeds).
    #[arg(long)]
    seeds: Option<String>,
}

#[derive(Args)]
struct GenArgs {
    #[arg(long)]
    rows: usize,
    #[arg(long)]
    cols: usize,
    #[arg(long, default_value_t = 4)]
    parts: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory for instance.json and problem.json.
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Also write a Graphviz rendering to this path.
    #[arg(long)]
    dot: Option<PathBuf>,
}

#[derive(Args)]
struct ValidateArgs {
    /// Problem-definition JSON.
    problem: PathBuf,
    /// Hierarchical matrix JSON (2-D integer array).
    matrix: PathBuf,
}

fn parse_list<T: std::str::FromStr>(text: &str) -> CliResult<Vec<T>>
where
    T::Err: std::fmt::Display,
{
    text.split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| s.trim().parse::<T>().map_err(|e| CliError(format!("bad list entry {s:?}: {e}"))))
        .collect()
}

impl CommonArgs {
    fn resolve(&self) -> CliResult<ExperimentConfig> {
        let mut config = match &self.config {
            Some(path) => ExperimentConfig::load(path)?,
            None => ExperimentConfig::default(),
        };

        if let Some(problem) = &self.problem {
            config.problem = match problem.as_str() {
                "lnf" => ProblemSource::Lnf {
                    rows: self.rows.unwrap_or(6),
                    cols: self.cols.unwrap_or(6),
                    parts: self.parts.unwrap_or(4),
                    seed: self.seed.unwrap_or(0),
                },
                name if name.ends_with(".json") => ProblemSource::File { path: PathBuf::from(name) },
                name => ProblemSource::Builtin { name: name.to_string() },
            };
        } else if let ProblemSource::Lnf { rows, cols, parts, seed } = &mut config.problem {
            // allow touching up generator parameters of a loaded config
            if let Some(v) = self.rows {
                *rows = v;
            }
            if let Some(v) = self.cols {
                *cols = v;
            }
            if let Some(v) = self.parts {
                *parts = v;
            }
            if let Some(v) = self.seed {
                *seed = v;
            }
        }

        if let Some(method) = self.method {
            config.method = method;
        }
        if let Some(name) = &self.criterion {
            config.dald.criterion = match name.to_ascii_uppercase().as_str() {
                "B1" => StopCriterion::ExactInner,
                "B2" => StopCriterion::DecayingTolerance {
                    initial_tol: self.b2_initial.unwrap_or(1e-1),
                    decay: self.b2_decay.unwrap_or(0.5),
                },
                "B3" => StopCriterion::GrowingSweepCap {
                    initial_cap: self.b3_initial.unwrap_or(1),
                    growth: self.b3_growth.unwrap_or(2.0),
                },
                "B4" => StopCriterion::FixedSweepCap {
                    max_sweeps: self.vmax.ok_or(CliError("--criterion B4 requires --vmax".into()))?,
                },
                other => return Err(CliError(format!("unknown criterion {other:?}"))),
            };
        } else if let Some(vmax) = self.vmax {
            config.dald.criterion = StopCriterion::FixedSweepCap { max_sweeps: vmax };
        }
        if let Some(v) = self.eps_pri {
            config.dald.eps_pri = v;
        }
        if let Some(v) = self.eps_dual {
            config.dald.eps_dual = v;
        }
        if let Some(v) = self.max_outer {
            config.dald.max_outer = v;
        }
        if let Some(v) = self.max_inner {
            config.dald.max_cumulative_inner = v;
        }
        if let Some(v) = self.rho {
            config.dald.initial_rho = v;
        }
        if let Some(v) = self.rho_growth {
            config.dald.penalty_growth = v;
        }
        if let Some(x0) = &self.x0 {
            config.dald.initial_x = Some(parse_list(x0)?);
        }
        if let Some(kind) = &self.solver {
            config.solver.kind = match kind.as_str() {
                "projected-gradient" => SolverKind::ProjectedGradient,
                "analytic-linear" => SolverKind::AnalyticLinear,
                other => return Err(CliError(format!("unknown solver {other:?}"))),
            };
        }
        if let Some(tol) = self.solver_tol {
            config.solver.tol = tol;
        }
        if let Some(plan) = &self.plan {
            config.plan = match plan.as_str() {
                "chain" => PlanSource::Chain,
                path => PlanSource::MatrixFile { path: PathBuf::from(path) },
            };
        }
        if let Some(seed) = self.plan_seed {
            config.plan_seed = seed;
        }
        if let Some(out) = &self.out {
            config.output_dir = out.clone();
        }
        Ok(config)
    }
}

#[derive(Serialize)]
struct SummaryDoc<'a> {
    #[serde(flatten)]
    run: &'a dald_core::driver::RunSummary,
    wall_time_ms: u128,
    #[serde(skip_serializing_if = "Option::is_none")]
    oracle_cost: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    oracle_gap: Option<f64>,
    config: &'a ExperimentConfig,
}

/// (trace, optional (oracle cost, relative gap), wall time in ms)
type RunOutput = (RunTrace, Option<(f64, f64)>, u128);

fn execute(config: &ExperimentConfig, seed_override: Option<u64>) -> CliResult<RunOutput> {
    let (problem, instance) = config.build_problem_with_seed(seed_override)?;
    let plan = config.build_plan(&problem)?;
    let start = Instant::now();
    let trace = match config.method {
        Method::Dald => run_dald(&problem, &plan, &config.solver, &config.dald)?,
        Method::Alm => run_alm(&problem, &config.solver, &config.dald)?,
        Method::Bcd => run_bcd(&problem, &plan, &config.solver, &config.dald)?,
    };
    let wall_ms = start.elapsed().as_millis();
    let oracle = instance.as_ref().and_then(|inst| config::oracle_stats(inst, trace.summary.objective));
    Ok((trace, oracle, wall_ms))
}

fn cmd_run(args: &RunArgs) -> CliResult<i32> {
    let config = args.common.resolve()?;
    let (trace, oracle, wall_ms) = execute(&config, None)?;

    let dir = config.resolved_output_dir();
    std::fs::create_dir_all(&dir)
        .map_err(|e| CliError(format!("cannot create {}: {e}", dir.display())))?;
    let trace_path = dir.join("trace.csv");
    let mut file = std::fs::File::create(&trace_path)?;
    trace.write_csv(&mut file)?;

    let summary = SummaryDoc {
        run: &trace.summary,
        wall_time_ms: wall_ms,
        oracle_cost: oracle.map(|(c, _)| c),
        oracle_gap: oracle.map(|(_, g)| g),
        config: &config,
    };
    std::fs::write(dir.join("summary.json"), serde_json::to_string_pretty(&summary)?)?;

    println!(
        "{}: k={} sweeps={} objective={} ||C||inf={:.3e} ||D||inf={:.3e} ({} ms)",
        trace.summary.status,
        trace.summary.outer_iters,
        trace.summary.cumulative_inner,
        trace.summary.objective,
        trace.summary.primal_inf,
        trace.summary.dual_inf,
        wall_ms
    );
    if let Some((cost, gap)) = oracle {
        println!("oracle: cost={cost} gap={gap:.3e}");
    }
    println!("wrote {} and {}", trace_path.display(), dir.join("summary.json").display());

    Ok(if trace.summary.status == RunStatus::Converged { 0 } else { 2 })
}

fn cmd_sweep_vmax(args: &SweepArgs) -> CliResult<i32> {
    let config = args.common.resolve()?;
    let vmax_list: Vec<usize> = parse_list(&args.vmax_list)?;
    if vmax_list.is_empty() {
        return Err(CliError("--vmax-list must not be empty".into()));
    }
    let seeds: Vec<u64> = match &args.seeds {
        Some(s) => parse_list(s)?,
        None => config.seeds.clone(),
    };
    if seeds.is_empty() {
        return Err(CliError("seed list must not be empty".into()));
    }

    let dir = config.resolved_output_dir();
    std::fs::create_dir_all(&dir)
        .map_err(|e| CliError(format!("cannot create {}: {e}", dir.display())))?;
    let mut csv = String::from("vmax,seed,status,cumulative_inner,outer_iters,objective\n");
    for &vmax in &vmax_list {
        for &seed in &seeds {
            let mut cell = config.clone();
            cell.dald.criterion = StopCriterion::FixedSweepCap { max_sweeps: vmax };
            let (trace, _, _) = execute(&cell, Some(seed))?;
            let s = &trace.summary;
            println!(
                "vmax={vmax} seed={seed}: {} after {} sweeps ({} outer)",
                s.status, s.cumulative_inner, s.outer_iters
            );
            csv.push_str(&format!(
                "{vmax},{seed},{},{},{},{}\n",
                s.status, s.cumulative_inner, s.outer_iters, s.objective
            ));
        }
    }
    let path = dir.join("sweep.csv");
    std::fs::write(&path, csv)?;
    println!("wrote {}", path.display());
    Ok(0)
}

fn cmd_gen_lnf(args: &GenArgs) -> CliResult<i32> {
    let (problem, instance) = lnf_generate(args.rows, args.cols, args.seed, args.parts)?;
    std::fs::create_dir_all(&args.out)
        .map_err(|e| CliError(format!("cannot create {}: {e}", args.out.display())))?;
    let instance_path = args.out.join("instance.json");
    std::fs::write(&instance_path, serde_json::to_string_pretty(&instance)?)?;
    let problem_path = args.out.join("problem.json");
    std::fs::write(&problem_path, ProblemFile::from_problem(&problem)?.to_json_pretty())?;
    if let Some(dot) = &args.dot {
        std::fs::write(dot, instance.to_dot())?;
    }
    println!(
        "generated {}x{} instance (seed {}, {} arcs, total supply {}) at {}",
        args.rows,
        args.cols,
        args.seed,
        instance.arcs.len(),
        instance.total_supply(),
        instance_path.display()
    );
    Ok(0)
}

fn cmd_validate(args: &ValidateArgs) -> CliResult<i32> {
    let problem_text = std::fs::read_to_string(&args.problem)
        .map_err(|e| CliError(format!("cannot read {}: {e}", args.problem.display())))?;
    let problem = ProblemFile::from_json(&problem_text)
        .map_err(|e| CliError(format!("{}: {e}", args.problem.display())))?
        .into_problem()?;

    let matrix_text = std::fs::read_to_string(&args.matrix)
        .map_err(|e| CliError(format!("cannot read {}: {e}", args.matrix.display())))?;
    let matrix: HierarchicalMatrix = serde_json::from_str(&matrix_text)
        .map_err(|e| CliError(format!("{} is not a 2-D integer array: {e}", args.matrix.display())))?;

    let network = network_from_matrix(&matrix)?;
    println!(
        "matrix ok: {} nodes, {} edges, root {}, {} levels",
        network.node_count(),
        network.edges().len(),
        network.root(),
        network.level_count()
    );
    if network.node_count() != problem.num_blocks() {
        return Err(CliError(format!(
            "matrix has {} nodes but the problem has {} blocks",
            network.node_count(),
            problem.num_blocks()
        )));
    }

    let plan = es_sweep_plan(&network);
    for (i, stage) in plan.stages.iter().enumerate() {
        println!("stage {}: {:?}", i + 1, stage);
    }
    let warnings = validate_stage_coupling(&problem, &plan);
    for w in &warnings {
        println!("warning: {w}");
    }
    if warnings.is_empty() {
        println!("no stage-coupling warnings");
    }
    Ok(0)
}

fn main() {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run(args) => cmd_run(args),
        Command::SweepVmax(args) => cmd_sweep_vmax(args),
        Command::GenLnf(args) => cmd_gen_lnf(args),
        Command::Validate(args) => cmd_validate(args),
    };
    match result {
        Ok(code) => std::process::exit(code),
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(1);
        }
    }
}
