//! `mco`: run the optimizer, benchmark it against PSO, and analyze the
//! switched linear model behind it.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::Serialize;

use mco_core::analysis::{
    check_theorem_hypotheses, h1_limit, matrix_csv, spectral_report, SpectralReport,
    SystemMatrices, TheoremVerdict,
};
use mco_core::config::{parse_topology, RunConfig};
use mco_core::experiments::{
    run_trials, scalability_sweep, stats_csv, timing_csv, to_json, Experiment, Format,
};
use mco_core::graph::{laplacian, topology_at, Digraph, TopologySchedule};
use mco_core::objectives::REGISTRY;
use mco_core::swarm::{self, Algorithm, CoeffMode, CoeffSample};
use mco_core::{io, Error};

#[derive(Parser)]
#[command(
    name = "mco",
    version,
    about = "Multiagent coordination optimizer, benchmarks and convergence analyzer"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the optimizer once and write its run record.
    Run(RunArgs),
    /// Run many seeds and write summary statistics.
    Bench(RunArgs),
    /// Run MCO and PSO on the same seeds and write both summaries.
    Compare(RunArgs),
    /// Time serial against parallel agent updates for several worker counts.
    Sweep(SweepArgs),
    /// Check the convergence hypotheses for one coefficient tuple and graph.
    Analyze(AnalyzeArgs),
    /// Print the objective registry.
    ListObjectives(ListArgs),
}

/// Flags mirror the config file keys; a flag overrides the file, the file overrides defaults.
#[derive(Args, Debug, Clone)]
struct RunArgs {
    /// TOML config file with the same keys as these flags [default: none]
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Optimizer: mco or pso [default: mco]
    #[arg(long, visible_alias = "algo", value_parser = kebab::<Algorithm>)]
    algorithm: Option<Algorithm>,
    /// Objective name, see list-objectives [default: sphere]
    #[arg(long)]
    objective: Option<String>,
    /// Problem dimension [default: 30]
    #[arg(long)]
    n: Option<usize>,
    /// Number of agents [default: 30]
    #[arg(long)]
    q: Option<usize>,
    /// complete, ring, star, erdos-renyi:P, erdos-renyi-directed:P, random:P or random-directed:P [default: complete]
    #[arg(long)]
    topology: Option<String>,
    /// Graph JSON file {"q", "directed", "edges"}; replaces --topology [default: none]
    #[arg(long, value_name = "PATH")]
    topology_file: Option<PathBuf>,
    /// Seed for a single run and for random topologies [default: 0]
    #[arg(long)]
    seed: Option<u64>,
    /// Iteration budget [default: 1000]
    #[arg(long)]
    iters: Option<u64>,
    /// Step size [default: 1.0]
    #[arg(long)]
    h: Option<f64>,
    /// shared (one draw per iteration) or per-agent [default: shared]
    #[arg(long, value_parser = kebab::<CoeffMode>)]
    coeff_mode: Option<CoeffMode>,
    /// Comma-separated finite coefficient set, e.g. 0.25,0.5 [default: uniform on (0,1)]
    #[arg(long, value_delimiter = ',')]
    omega: Option<Vec<f64>>,
    /// Clamp velocities to the velocity box [default: false]
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    clamp_velocity: Option<bool>,
    /// Clamp positions to the search box [default: false]
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    clamp_position: Option<bool>,
    /// Use +L in the consensus terms instead of -L [default: false]
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    raw_alg1_sign: Option<bool>,
    /// Stop when the best value moves less than --stagnation-tol over this many iterations [default: 100]
    #[arg(long)]
    stagnation_window: Option<u64>,
    /// Relative tolerance of the stagnation test [default: 1e-12]
    #[arg(long)]
    stagnation_tol: Option<f64>,
    /// Worker threads [default: available parallelism]
    #[arg(long, env = "SWARM_OPT_WORKERS")]
    workers: Option<usize>,
    /// Busy-wait added to every objective evaluation, in microseconds [default: 0]
    #[arg(long)]
    eval_cost_us: Option<u64>,
    /// Number of seeds for bench and compare [default: 20]
    #[arg(long)]
    runs: Option<usize>,
    /// First seed for bench and compare; seeds are consecutive [default: 1]
    #[arg(long)]
    seeds_from: Option<u64>,
    /// Output path, or - for standard output [default: -]
    #[arg(long)]
    output: Option<String>,
    /// csv or json [default: json for run, csv for bench and compare]
    #[arg(long)]
    format: Option<String>,
}

#[derive(Args, Debug)]
struct SweepArgs {
    #[command(flatten)]
    run: RunArgs,
    /// Comma-separated worker counts to time
    #[arg(long, value_delimiter = ',', default_value = "1,2,4,8")]
    worker_list: Vec<usize>,
}

#[derive(Args, Debug)]
struct AnalyzeArgs {
    /// Position coupling gain
    #[arg(long, default_value_t = 0.3)]
    mu: f64,
    /// Velocity coupling gain
    #[arg(long, default_value_t = 0.2)]
    eta: f64,
    /// Pull toward the network best
    #[arg(long, default_value_t = 0.5)]
    kappa: f64,
    /// Step size
    #[arg(long, default_value_t = 0.1)]
    h: f64,
    /// Problem dimension
    #[arg(long, default_value_t = 1)]
    n: usize,
    /// Number of agents
    #[arg(long, default_value_t = 2)]
    q: usize,
    /// complete, ring, star, erdos-renyi:P or erdos-renyi-directed:P
    #[arg(long, default_value = "complete")]
    topology: String,
    /// Graph JSON file; replaces --topology [default: none]
    #[arg(long, value_name = "PATH")]
    topology_file: Option<PathBuf>,
    /// Seed for random topologies
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Leader agent holding the network best, 1-based
    #[arg(long, default_value_t = 1)]
    j: usize,
    /// Eigenvalue cluster and span tolerance
    #[arg(long, default_value_t = 1e-9)]
    tol: f64,
    /// Upper end of the step-size search for the first h where H1 fails
    #[arg(long, default_value_t = 10.0)]
    h_max: f64,
    /// Directory for CSV dumps of the system matrices [default: none]
    #[arg(long, value_name = "DIR")]
    dump_matrices: Option<PathBuf>,
    /// Output path, or - for standard output
    #[arg(long, default_value = "-")]
    output: String,
}

#[derive(Args, Debug)]
struct ListArgs {
    /// table or json
    #[arg(long, default_value = "table")]
    format: String,
}

enum Failure {
    Usage(String),
    Runtime(String),
}

impl Failure {
    fn usage(e: impl ToString) -> Self {
        Failure::Usage(e.to_string())
    }

    fn runtime(e: impl ToString) -> Self {
        Failure::Runtime(e.to_string())
    }
}

/// Bad input is a usage error; failures reading or writing files are runtime errors.
fn classify(e: Error) -> Failure {
    match e {
        Error::Io { .. } => Failure::runtime(e),
        _ => Failure::usage(e),
    }
}

fn kebab<T: DeserializeOwned>(s: &str) -> Result<T, String> {
    serde_json::from_value(serde_json::Value::String(s.to_string())).map_err(|e| e.to_string())
}

impl RunArgs {
    fn overrides(&self) -> RunConfig {
        RunConfig {
            algorithm: self.algorithm,
            objective: self.objective.clone(),
            n: self.n,
            q: self.q,
            topology: self.topology.clone(),
            topology_file: self.topology_file.clone(),
            seed: self.seed,
            iters: self.iters,
            h: self.h,
            coeff_mode: self.coeff_mode,
            omega: self.omega.clone(),
            clamp_velocity: self.clamp_velocity,
            clamp_position: self.clamp_position,
            raw_alg1_sign: self.raw_alg1_sign,
            stagnation_window: self.stagnation_window,
            stagnation_tol: self.stagnation_tol,
            workers: self.workers,
            eval_cost_us: self.eval_cost_us,
            runs: self.runs,
            seeds_from: self.seeds_from,
            output: self.output.clone(),
            format: self.format.clone(),
        }
    }

    fn resolve(&self) -> Result<RunConfig, Failure> {
        let file = match &self.config {
            Some(path) => RunConfig::load(path).map_err(classify)?,
            None => RunConfig::default(),
        };
        Ok(file.merged(&self.overrides()))
    }
}

struct Resolved {
    cfg: RunConfig,
    exp: Experiment,
    workers: usize,
    output: String,
    format: Format,
}

fn default_workers() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

fn resolve(args: &RunArgs, default_format: Format) -> Result<Resolved, Failure> {
    let cfg = args.resolve()?;
    let params = cfg.swarm_params().map_err(classify)?;
    let objective = cfg.objective_spec().map_err(classify)?;
    let schedule = cfg.schedule().map_err(classify)?;
    let workers = cfg.workers.unwrap_or_else(default_workers);
    if workers == 0 {
        return Err(Failure::usage("--workers must be at least 1"));
    }
    let format = match &cfg.format {
        Some(f) => f.parse().map_err(classify)?,
        None => default_format,
    };
    if cfg.runs == Some(0) {
        return Err(Failure::usage("--runs must be at least 1"));
    }
    Ok(Resolved {
        output: cfg.output.clone().unwrap_or_else(|| "-".into()),
        exp: Experiment {
            params,
            objective,
            schedule,
        },
        cfg,
        workers,
        format,
    })
}

#[derive(Serialize)]
struct Meta<'a> {
    command: &'a str,
    duration_seconds: f64,
    workers: usize,
}

/// Writes the primary artifact; timing goes to a `<output>.meta.json` sidecar.
fn emit(output: &str, text: &str, meta: &Meta) -> Result<(), Failure> {
    if output == "-" {
        print!("{text}");
        eprintln!("{}: {:.3} s", meta.command, meta.duration_seconds);
        return Ok(());
    }
    let path = Path::new(output);
    io::write_atomic(path, text.as_bytes()).map_err(Failure::runtime)?;
    let mut side = path.as_os_str().to_os_string();
    side.push(".meta.json");
    io::write_atomic(Path::new(&side), to_json(meta).as_bytes()).map_err(Failure::runtime)?;
    eprintln!("wrote {output} ({:.3} s)", meta.duration_seconds);
    Ok(())
}

fn algo_name(a: Algorithm) -> &'static str {
    match a {
        Algorithm::Mco => "mco",
        Algorithm::Pso => "pso",
    }
}

fn seeds(cfg: &RunConfig) -> Vec<u64> {
    let from = cfg.seeds_from.unwrap_or(1);
    (0..cfg.runs.unwrap_or(20) as u64)
        .map(|k| from + k)
        .collect()
}

fn cmd_run(args: &RunArgs) -> Result<(), Failure> {
    let r = resolve(args, Format::Json)?;
    let seed = r.cfg.seed.unwrap_or(0);
    eprintln!(
        "{} on {} (q={}, n={}), seed {seed}, {} workers",
        algo_name(r.exp.params.algorithm),
        r.exp.objective.name,
        r.exp.params.q,
        r.exp.params.n,
        r.workers
    );
    let started = Instant::now();
    let record = swarm::run_with_workers(
        &r.exp.params,
        &r.exp.objective,
        &r.exp.schedule,
        seed,
        r.workers,
    )
    .map_err(Failure::runtime)?;
    let text = match r.format {
        Format::Json => to_json(&record),
        Format::Csv => record.trace_csv(),
    };
    let meta = Meta {
        command: "run",
        duration_seconds: started.elapsed().as_secs_f64(),
        workers: r.workers,
    };
    emit(&r.output, &text, &meta)
}

/// `None` benchmarks the configured algorithm alone.
fn cmd_bench(
    args: &RunArgs,
    algorithms: Option<&[Algorithm]>,
    command: &str,
) -> Result<(), Failure> {
    let r = resolve(args, Format::Csv)?;
    let configured = [r.exp.params.algorithm];
    let algorithms = algorithms.unwrap_or(&configured);
    let seeds = seeds(&r.cfg);
    let started = Instant::now();
    let mut summaries = Vec::new();
    for &algorithm in algorithms {
        let mut exp = r.exp.clone();
        exp.params.algorithm = algorithm;
        eprintln!(
            "{} on {}: {} runs from seed {}, {} workers",
            algo_name(algorithm),
            exp.objective.name,
            seeds.len(),
            seeds[0],
            r.workers
        );
        summaries.push(run_trials(&exp, &seeds, r.workers).map_err(Failure::runtime)?);
    }
    let text = match r.format {
        Format::Csv => stats_csv(&summaries).map_err(Failure::runtime)?,
        Format::Json => to_json(&summaries),
    };
    let meta = Meta {
        command,
        duration_seconds: started.elapsed().as_secs_f64(),
        workers: r.workers,
    };
    emit(&r.output, &text, &meta)
}

fn cmd_sweep(args: &SweepArgs) -> Result<(), Failure> {
    let r = resolve(&args.run, Format::Csv)?;
    if args.worker_list.contains(&0) {
        return Err(Failure::usage("--worker-list entries must be at least 1"));
    }
    let started = Instant::now();
    let reports = scalability_sweep(&r.exp, r.cfg.seed.unwrap_or(0), &args.worker_list)
        .map_err(Failure::runtime)?;
    let text = match r.format {
        Format::Csv => timing_csv(&reports).map_err(Failure::runtime)?,
        Format::Json => to_json(&reports),
    };
    let meta = Meta {
        command: "sweep",
        duration_seconds: started.elapsed().as_secs_f64(),
        workers: args.worker_list.iter().copied().max().unwrap_or(1),
    };
    emit(&r.output, &text, &meta)
}

#[derive(Serialize)]
struct Analysis {
    mu: f64,
    eta: f64,
    kappa: f64,
    h: f64,
    n: usize,
    q: usize,
    j: usize,
    smoothing: SpectralReport,
    reset: SpectralReport,
    verdict: TheoremVerdict,
    /// First step size where H1 fails, if any below `h_max`.
    h1_limit: Option<f64>,
}

fn analysis_graph(a: &AnalyzeArgs) -> Result<Digraph, Failure> {
    if let Some(path) = &a.topology_file {
        let g = Digraph::load(path).map_err(classify)?;
        if g.q() != a.q {
            return Err(Failure::usage(format!(
                "{}: graph has {} nodes but q = {}",
                path.display(),
                g.q(),
                a.q
            )));
        }
        return Ok(g);
    }
    match parse_topology(&a.topology, a.q, a.seed).map_err(classify)? {
        s @ TopologySchedule::Static(_) => Ok(topology_at(&s, 0).map_err(classify)?.into_owned()),
        _ => Err(Failure::usage("analyze needs a fixed topology")),
    }
}

fn cmd_analyze(a: &AnalyzeArgs) -> Result<(), Failure> {
    if a.j == 0 || a.j > a.q {
        return Err(Failure::usage(format!(
            "--j must be between 1 and q = {}",
            a.q
        )));
    }
    let coeffs = CoeffSample {
        eta: a.eta,
        mu: a.mu,
        kappa: a.kappa,
        h: a.h,
    };
    let g = analysis_graph(a)?;
    let l = laplacian(&g);
    let leader = a.j - 1;
    let started = Instant::now();
    let sm = SystemMatrices::assemble(coeffs, &l, a.n, leader).map_err(classify)?;
    let verdict = check_theorem_hypotheses(coeffs, &l, a.n, leader, a.tol).map_err(classify)?;
    let limit = h1_limit(coeffs, &l, a.n, leader, a.h_max, a.tol).map_err(classify)?;
    let af = sm.a_family();
    let bf = sm.b_family();
    if let Some(dir) = &a.dump_matrices {
        std::fs::create_dir_all(dir)
            .map_err(|e| Failure::runtime(format!("{}: {e}", dir.display())))?;
        for (name, m) in [("a_family", &af), ("b_family", &bf), ("laplacian", &l)] {
            io::write_atomic(&dir.join(format!("{name}.csv")), matrix_csv(m).as_bytes())
                .map_err(Failure::runtime)?;
        }
    }
    let report = Analysis {
        mu: a.mu,
        eta: a.eta,
        kappa: a.kappa,
        h: a.h,
        n: a.n,
        q: a.q,
        j: a.j,
        smoothing: spectral_report(&af, a.tol),
        reset: spectral_report(&bf, a.tol),
        verdict,
        h1_limit: limit,
    };
    let meta = Meta {
        command: "analyze",
        duration_seconds: started.elapsed().as_secs_f64(),
        workers: 1,
    };
    emit(&a.output, &to_json(&report), &meta)
}

fn cmd_list(a: &ListArgs) -> Result<(), Failure> {
    match a.format.as_str() {
        "json" => print!("{}", to_json(REGISTRY)),
        "table" => {
            println!(
                "{:<14} {:>9} {:>10} {:>6} {:>6}",
                "name", "default_n", "bounds", "min_n", "f*"
            );
            for e in REGISTRY {
                let f = e.f_star.map_or("-".to_string(), |v| v.to_string());
                println!(
                    "{:<14} {:>9} {:>10} {:>6} {:>6}",
                    e.name,
                    e.default_n,
                    format!("±{}", e.bound),
                    e.min_n,
                    f
                );
            }
        }
        other => {
            return Err(Failure::usage(format!(
                "unknown format '{other}' (table or json)"
            )))
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Bench(a) => cmd_bench(a, None, "bench"),
        Command::Compare(a) => cmd_bench(a, Some(&[Algorithm::Mco, Algorithm::Pso]), "compare"),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Analyze(a) => cmd_analyze(a),
        Command::ListObjectives(a) => cmd_list(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}
