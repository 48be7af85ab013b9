use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, ValueEnum};
use gaprewire::analytic::{cheeger_constant, CHEEGER_NODE_LIMIT};
use gaprewire::graph::{write_edge_list_with_comments, Direction, EdgeDelta, Graph};
use gaprewire::rewiring::{
    rewire as run_rewire, RewirePlan, RewireTrace, Strategy, DEFAULT_CANDIDATE_CAP,
};
use gaprewire::smoothing::{smoothing_mse_curve, SmoothingConfig, DEFAULT_RIDGE_ALPHA};
use gaprewire::spectral::{
    exact_spectrum, iterative_spectrum, SolverConfig, SpectrumEstimate, DENSE_NODE_LIMIT,
};
use serde_json::{json, Value};

use crate::input::{load_labels, GraphSource, LoadedGraph};
use crate::CliError;

const OUT_ENV: &str = "GAPREWIRE_OUT";
const DEFAULT_OUT: &str = "gaprewire-out";

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum StrategyArg {
    Proxy,
    Eldan,
    Exact,
}

impl From<StrategyArg> for Strategy {
    fn from(s: StrategyArg) -> Self {
        match s {
            StrategyArg::Proxy => Strategy::Proxy,
            StrategyArg::Eldan => Strategy::Eldan,
            StrategyArg::Exact => Strategy::ExactGreedy,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DirectionArg {
    Add,
    Delete,
}

impl From<DirectionArg> for Direction {
    fn from(d: DirectionArg) -> Self {
        match d {
            DirectionArg::Add => Direction::Add,
            DirectionArg::Delete => Direction::Delete,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct SolverArgs {
    /// Eigen-residual at which power iteration stops.
    #[arg(long, default_value_t = SolverConfig::default().tolerance)]
    pub tolerance: f64,

    #[arg(long, default_value_t = SolverConfig::default().max_iterations)]
    pub max_iterations: usize,
}

#[derive(Debug, Clone, Args)]
pub struct PlanArgs {
    #[arg(long, value_enum, default_value = "proxy")]
    pub strategy: StrategyArg,

    /// Edges modified between eigenpair refreshes.
    #[arg(long, default_value_t = 1)]
    pub update_period: usize,

    /// Non-edges sampled per pass when adding.
    #[arg(long, default_value_t = DEFAULT_CANDIDATE_CAP, conflicts_with = "all_candidates")]
    pub candidate_cap: usize,

    /// Score every non-edge when adding.
    #[arg(long)]
    pub all_candidates: bool,

    /// Skip deletions that would disconnect the graph.
    #[arg(long)]
    pub forbid_disconnect: bool,

    /// Rewire a disconnected input instead of rejecting it.
    #[arg(long)]
    pub allow_disconnected: bool,

    /// Power steps per candidate when scoring Eldan deletions.
    #[arg(long, default_value_t = gaprewire::rewiring::ELDAN_DELETE_REFINE_STEPS)]
    pub eldan_refine_steps: usize,

    #[command(flatten)]
    pub solver: SolverArgs,
}

impl PlanArgs {
    fn plan(
        &self,
        direction: Direction,
        strategy: Strategy,
        budget: usize,
        seed: u64,
    ) -> RewirePlan {
        let mut plan = RewirePlan::new(direction, strategy, budget);
        plan.update_period = self.update_period;
        plan.candidate_cap = (!self.all_candidates).then_some(self.candidate_cap);
        plan.seed = seed;
        plan.forbid_disconnect = self.forbid_disconnect;
        plan.allow_disconnected_input = self.allow_disconnected;
        plan.solver_tolerance = self.solver.tolerance;
        plan.solver_max_iterations = self.solver.max_iterations;
        plan.eldan_refine_steps = self.eldan_refine_steps;
        plan
    }
}

#[derive(Debug, Clone, Args)]
pub struct OutArgs {
    /// Output directory.
    #[arg(long, env = OUT_ENV, default_value = DEFAULT_OUT)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct RewireArgs {
    #[command(flatten)]
    pub source: GraphSource,

    #[command(flatten)]
    pub plan: PlanArgs,

    #[arg(long, value_enum, conflicts_with = "delete")]
    pub direction: Option<DirectionArg>,

    /// Number of edges to modify.
    #[arg(long, conflicts_with = "delete")]
    pub budget: Option<usize>,

    /// Shorthand for `--direction delete --budget N`.
    #[arg(long, value_name = "N")]
    pub delete: Option<usize>,

    /// Eldan only: stop when no candidate satisfies the criterion.
    #[arg(long)]
    pub stop_on_criterion: bool,

    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    /// Dense below 512 nodes, power iteration above.
    Auto,
    Exact,
    Iterative,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    #[command(flatten)]
    pub source: GraphSource,

    #[arg(long, value_enum, default_value = "auto")]
    pub method: MethodArg,

    #[command(flatten)]
    pub solver: SolverArgs,

    /// Also write `analysis.json` into this directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SmoothArgs {
    #[command(flatten)]
    pub source: GraphSource,

    /// `config1`..`config4` or a file of per-node `+1`/`-1` labels.
    #[arg(long, default_value = "config1")]
    pub labels: String,

    /// Largest aggregation order K; orders 0..=K are reported.
    #[arg(long, default_value_t = 10)]
    pub orders: usize,

    #[arg(long, default_value_t = 200)]
    pub trials: usize,

    #[arg(long, default_value_t = DEFAULT_RIDGE_ALPHA)]
    pub ridge_alpha: f64,

    /// Feature dimension.
    #[arg(long, default_value_t = 1)]
    pub dim: usize,

    /// Skip the Dirichlet energy and cosine distance columns.
    #[arg(long)]
    pub no_diagnostics: bool,

    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BenchDirection {
    Add,
    Delete,
    Both,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[command(flatten)]
    pub source: GraphSource,

    #[command(flatten)]
    pub plan: PlanArgs,

    /// Strategies to run; repeatable. Defaults to all three.
    #[arg(long = "run", value_enum)]
    pub strategies: Vec<StrategyArg>,

    #[arg(long, value_enum, default_value = "both")]
    pub direction: BenchDirection,

    #[arg(long, default_value_t = 15)]
    pub budget: usize,

    /// Largest graph whose per-step gap is recomputed densely; larger
    /// graphs use warm-started power iteration for the trajectory.
    #[arg(long, default_value_t = 512)]
    pub exact_limit: usize,

    #[command(flatten)]
    pub out: OutArgs,
}

/// Files are collected first and written together, so a run that fails
/// validation leaves nothing behind.
struct Outputs {
    dir: PathBuf,
    files: Vec<(String, String)>,
}

impl Outputs {
    fn new(dir: &Path) -> Self {
        Outputs {
            dir: dir.to_path_buf(),
            files: Vec::new(),
        }
    }

    fn add(&mut self, name: impl Into<String>, body: String) {
        self.files.push((name.into(), body));
    }

    fn write(self) -> Result<Vec<PathBuf>, CliError> {
        fs::create_dir_all(&self.dir).map_err(|e| {
            CliError::validation(format!("cannot create {}: {e}", self.dir.display()))
        })?;
        self.files
            .into_iter()
            .map(|(name, body)| {
                let path = self.dir.join(name);
                fs::write(&path, body).map_err(|e| {
                    CliError::validation(format!("cannot write {}: {e}", path.display()))
                })?;
                Ok(path)
            })
            .collect()
    }
}

fn header(command: &str, seed: u64, config: &Value) -> String {
    format!("# gaprewire {command}\n# seed={seed}\n# config={config}\n")
}

fn trace_csv(trace: &RewireTrace) -> Result<String, CliError> {
    let mut buf = Vec::new();
    trace.write_csv(&mut buf)?;
    Ok(String::from_utf8(buf).expect("csv is utf-8"))
}

fn pretty(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("json value");
    s.push('\n');
    s
}

fn report_written(paths: &[PathBuf]) {
    for p in paths {
        eprintln!("wrote {}", p.display());
    }
}

pub fn rewire(args: RewireArgs) -> Result<u8, CliError> {
    let (direction, budget) = match (args.delete, args.direction, args.budget) {
        (Some(n), _, _) => (Direction::Delete, n),
        (None, Some(d), Some(n)) => (d.into(), n),
        _ => {
            return Err(CliError::validation(
                "give --delete N, or both --direction and --budget",
            ))
        }
    };
    let loaded = args.source.load_one()?;
    let mut plan = args.plan.plan(
        direction,
        args.plan.strategy.into(),
        budget,
        args.source.seed,
    );
    plan.stop_on_criterion = args.stop_on_criterion;
    plan.validate()?;

    let (graph, trace) = run_rewire(&loaded.graph, &plan)?;

    let config = json!({ "source": loaded.source, "plan": plan });
    let head = header("rewire", args.source.seed, &config);
    let mut out = Outputs::new(&args.out.out);
    out.add(
        "graph.el",
        write_edge_list_with_comments(
            &graph,
            &[
                "gaprewire rewire".into(),
                format!("seed={}", args.source.seed),
                format!("config={config}"),
            ],
        ),
    );
    out.add("trace.csv", head + &trace_csv(&trace)?);
    let mut summary = trace.summary_json();
    summary["seed"] = json!(args.source.seed);
    summary["config"] = config;
    out.add("summary.json", pretty(&summary));
    report_written(&out.write()?);

    eprintln!(
        "gap {:.6} -> {:.6} after {} step(s), {}",
        trace.initial_gap,
        trace.final_gap,
        trace.steps.len(),
        trace.terminal
    );
    if trace.warnings.is_empty() {
        Ok(0)
    } else {
        for w in &trace.warnings {
            eprintln!("warning: {w}");
        }
        Ok(CliError::NOT_CONVERGED)
    }
}

pub fn analyze(args: AnalyzeArgs) -> Result<u8, CliError> {
    let LoadedGraph { graph, source, .. } = args.source.load_one()?;
    let n = graph.num_nodes();
    let connected = graph.is_connected();
    let method = match args.method {
        MethodArg::Auto if n <= 512 => MethodArg::Exact,
        MethodArg::Auto => MethodArg::Iterative,
        m => m,
    };
    if method == MethodArg::Exact && n > DENSE_NODE_LIMIT {
        return Err(gaprewire::Error::GraphTooLargeForDense {
            num_nodes: n,
            limit: DENSE_NODE_LIMIT,
        }
        .into());
    }
    let cfg = SolverConfig {
        tolerance: args.solver.tolerance,
        max_iterations: args.solver.max_iterations,
        warm_start: None,
    };
    cfg.validate()?;

    let mut converged = true;
    let (gap, residual, iterations) = if !connected {
        (0.0, Value::Null, Value::Null)
    } else if method == MethodArg::Exact {
        let est = exact_spectrum(&graph)?;
        (est.gap, json!(est.residual), Value::Null)
    } else {
        let est = match iterative_spectrum(&graph, &cfg) {
            Ok(est) => est,
            Err(gaprewire::Error::NotConverged { estimate }) => {
                converged = false;
                *estimate
            }
            Err(e) => return Err(e.into()),
        };
        (est.gap, json!(est.residual), json!(est.iterations))
    };
    let cheeger = if connected && (2..=CHEEGER_NODE_LIMIT).contains(&n) {
        json!(cheeger_constant(&graph)?)
    } else {
        Value::Null
    };

    let report = json!({
        "nodes": n,
        "edges": graph.num_edges(),
        "connected": connected,
        "gap": gap,
        "residual": residual,
        "iterations": iterations,
        "converged": converged,
        "method": if method == MethodArg::Exact { "exact" } else { "iterative" },
        "cheeger": cheeger,
        "seed": args.source.seed,
        "source": source,
    });
    let text = pretty(&report);
    if let Some(dir) = &args.out {
        let mut out = Outputs::new(dir);
        out.add("analysis.json", text.clone());
        report_written(&out.write()?);
    }
    print!("{text}");
    Ok(if converged {
        0
    } else {
        CliError::NOT_CONVERGED
    })
}

pub fn smooth(args: SmoothArgs) -> Result<u8, CliError> {
    let graphs = args.source.load_all()?;
    let labels = load_labels(&args.labels)?;
    let cfg = SmoothingConfig {
        max_order: args.orders,
        trials: args.trials,
        ridge_alpha: args.ridge_alpha,
        seed: args.source.seed,
        dim: args.dim,
        diagnostics: !args.no_diagnostics,
    };
    cfg.validate()?;

    let mut reports = Vec::with_capacity(graphs.len());
    for g in &graphs {
        let report = smoothing_mse_curve(&g.graph, &labels, &cfg)
            .map_err(|e| CliError::from(e).with_context(&g.name))?;
        reports.push((g.name.clone(), report));
    }

    let config = json!({
        "source": graphs[0].source,
        "labels": labels,
        "smoothing": cfg,
    });
    let head = header("smooth", args.source.seed, &config);
    let mut out = Outputs::new(&args.out.out);
    for (name, report) in &reports {
        let mut buf = Vec::new();
        report.write_csv(&mut buf)?;
        out.add(
            format!("{name}.csv"),
            head.clone() + &String::from_utf8(buf).expect("csv is utf-8"),
        );
    }
    let summary = json!({
        "seed": args.source.seed,
        "config": config,
        "variants": reports.iter().map(|(n, r)| json!({ "name": n, "report": r })).collect::<Vec<_>>(),
    });
    out.add("smoothing.json", pretty(&summary));
    report_written(&out.write()?);
    for (name, report) in &reports {
        let k = report.orders.len().min(4);
        let row: Vec<String> = report.orders[..k]
            .iter()
            .map(|o| format!("{:.4}", o.mse_mean))
            .collect();
        eprintln!("{name:<12} mse k=0.. {}", row.join(" "));
    }
    Ok(0)
}

impl CliError {
    fn with_context(mut self, what: &str) -> Self {
        self.message = format!("{what}: {}", self.message);
        self
    }
}

/// Per-step gaps along a trace: dense when the graph is small enough,
/// otherwise warm-started power iteration.
fn trajectory(
    start: &Graph,
    trace: &RewireTrace,
    direction: Direction,
    exact: bool,
    solver: &SolverConfig,
    warnings: &mut Vec<String>,
) -> Result<Vec<f64>, CliError> {
    let mut g = start.clone();
    let mut warm: Option<Vec<f64>> = None;
    let mut solve = |g: &Graph, warm: &mut Option<Vec<f64>>| -> Result<f64, CliError> {
        if exact {
            return Ok(exact_spectrum(g)?.gap);
        }
        if !g.is_connected() {
            return Ok(0.0);
        }
        let cfg = SolverConfig {
            warm_start: warm.take(),
            ..solver.clone()
        };
        let est: SpectrumEstimate = match iterative_spectrum(g, &cfg) {
            Ok(est) => est,
            Err(gaprewire::Error::NotConverged { estimate }) => {
                warnings.push(format!(
                    "trajectory solve not converged (residual {:.3e})",
                    estimate.residual
                ));
                *estimate
            }
            Err(e) => return Err(e.into()),
        };
        *warm = Some(est.fiedler);
        Ok(est.gap)
    };
    let mut gaps = vec![solve(&g, &mut warm)?];
    for s in &trace.steps {
        g.apply_with(
            EdgeDelta {
                edge: s.edge,
                direction,
            },
            true,
        )?;
        gaps.push(solve(&g, &mut warm)?);
    }
    Ok(gaps)
}

pub fn bench(args: BenchArgs) -> Result<u8, CliError> {
    let loaded = args.source.load_one()?;
    let n = loaded.graph.num_nodes();
    let strategies: Vec<Strategy> = if args.strategies.is_empty() {
        vec![Strategy::Proxy, Strategy::Eldan, Strategy::ExactGreedy]
    } else {
        args.strategies.iter().map(|&s| s.into()).collect()
    };
    let directions: Vec<Direction> = match args.direction {
        BenchDirection::Add => vec![Direction::Add],
        BenchDirection::Delete => vec![Direction::Delete],
        BenchDirection::Both => vec![Direction::Add, Direction::Delete],
    };
    if args.exact_limit > DENSE_NODE_LIMIT {
        return Err(CliError::validation(format!(
            "--exact-limit is capped at {DENSE_NODE_LIMIT}"
        )));
    }
    let exact = n <= args.exact_limit;
    let solver = SolverConfig {
        tolerance: args.plan.solver.tolerance,
        max_iterations: args.plan.solver.max_iterations,
        warm_start: None,
    };
    solver.validate()?;

    let plans: Vec<RewirePlan> = directions
        .iter()
        .flat_map(|&d| strategies.iter().map(move |&s| (d, s)))
        .map(|(d, s)| args.plan.plan(d, s, args.budget, args.source.seed))
        .collect();
    for plan in &plans {
        // A zero budget is allowed here and yields empty trajectories; the
        // remaining fields still have to be valid.
        RewirePlan {
            budget: plan.budget.max(1),
            ..plan.clone()
        }
        .validate()?;
        if plan.strategy == Strategy::ExactGreedy && n > DENSE_NODE_LIMIT {
            return Err(gaprewire::Error::GraphTooLargeForDense {
                num_nodes: n,
                limit: DENSE_NODE_LIMIT,
            }
            .into());
        }
    }
    if !args.plan.allow_disconnected && !loaded.graph.is_connected() {
        return Err(gaprewire::Error::DisconnectedGraph.into());
    }

    let config = json!({
        "source": loaded.source,
        "budget": args.budget,
        "exact_trajectory": exact,
        "plans": plans,
    });
    let head = header("bench", args.source.seed, &config);
    let mut out = Outputs::new(&args.out.out);
    let mut timings = String::from(
        "strategy,direction,steps,seconds,initial_gap,final_gap,terminal_reason,warnings\n",
    );

    for plan in &plans {
        let name = format!("trajectory_{}_{}.csv", plan.strategy, plan.direction);
        let mut body = head.clone() + "step,edge_u,edge_v,gap\n";
        if args.budget == 0 {
            out.add(name, body);
            continue;
        }
        let started = Instant::now();
        let (_, trace) = run_rewire(&loaded.graph, plan)?;
        let seconds = started.elapsed().as_secs_f64();
        let mut warnings = trace.warnings.clone();
        let gaps = trajectory(
            &loaded.graph,
            &trace,
            plan.direction,
            exact,
            &solver,
            &mut warnings,
        )?;
        body.push_str(&format!("0,,,{:.17e}\n", gaps[0]));
        for (s, gap) in trace.steps.iter().zip(&gaps[1..]) {
            body.push_str(&format!(
                "{},{},{},{gap:.17e}\n",
                s.step, s.edge.u, s.edge.v
            ));
        }
        out.add(name, body);
        timings.push_str(&format!(
            "{},{},{},{seconds:.6},{:.17e},{:.17e},{},{}\n",
            plan.strategy,
            plan.direction,
            trace.steps.len(),
            trace.initial_gap,
            trace.final_gap,
            trace.terminal,
            warnings.len()
        ));
        eprintln!(
            "{:<6} {:<6} {:>4} steps {seconds:>9.3}s  gap {:.6} -> {:.6}",
            plan.strategy.to_string(),
            plan.direction.to_string(),
            trace.steps.len(),
            gaps[0],
            gaps.last().copied().unwrap_or(gaps[0])
        );
    }
    out.add("timings.csv", head + &timings);
    report_written(&out.write()?);
    Ok(0)
}
