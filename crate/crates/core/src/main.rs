use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use clap::{Args, Parser, Subcommand, ValueEnum};
use thiserror::Error;

use circuit_router::baselines::{sequential_route, Algorithm};
use circuit_router::bench::{run_bench, BenchConfig, STANDARD_BUDGETS};
use circuit_router::format::{parse_circuit, write_circuit};
use circuit_router::generator::{build_dataset, generate_corpus, split_dataset, DatasetConfig, GeneratorConfig};
use circuit_router::grid::validate_routing;
use circuit_router::mcts::{route, RolloutPolicy, SearchConfig, UctMode};
use circuit_router::policy::incremental::CompiledPolicy;
use circuit_router::policy::{load_params, save_params, train_with_log, PolicyShape, TrainConfig};
use circuit_router::render::write_svg;

#[derive(Parser)]
#[command(name = "circuit-router", version, about = "Grid circuit routing with Monte Carlo tree search")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write seeded random circuits, each with a verified witness routing.
    Generate(GenerateArgs),
    /// Build a routed dataset and train the policy network.
    Train(TrainArgs),
    /// Route one circuit file.
    Route(RouteArgs),
    /// Run the success and redundancy benchmark over a corpus.
    Bench(BenchArgs),
}

#[derive(Args, Clone)]
struct BoardArgs {
    #[arg(long, default_value_t = 30)]
    size: usize,
    /// Fixed net count; otherwise drawn from 3..=8.
    #[arg(long)]
    nets: Option<usize>,
    #[arg(long, default_value_t = 0.1)]
    obstacles: f64,
}

impl BoardArgs {
    fn config(&self, seed: u64) -> GeneratorConfig {
        let cfg = GeneratorConfig::new(self.size, seed).with_obstacles(self.obstacles);
        match self.nets {
            Some(k) => cfg.with_nets(k),
            None => cfg,
        }
    }
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    count: u64,
    #[command(flatten)]
    board: BoardArgs,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "corpus")]
    out: PathBuf,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long, default_value_t = 2000, value_parser = clap::value_parser!(u64).range(1..))]
    circuits: u64,
    #[command(flatten)]
    board: BoardArgs,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 30)]
    epochs: usize,
    /// Starting learning rate; it falls linearly to zero unless `--constant-rate`.
    #[arg(long, default_value_t = 0.03)]
    learning_rate: f64,
    #[arg(long)]
    constant_rate: bool,
    /// Train on the samples as generated, without random rotations and reflections.
    #[arg(long)]
    no_augment: bool,
    #[arg(long, default_value_t = 32)]
    batch_size: usize,
    /// Iterations of the search used when A* cannot route a circuit.
    #[arg(long, default_value_t = 200)]
    fallback_iterations: usize,
    /// Parameter file; the log goes next to it with a `.log` extension.
    #[arg(long, default_value = "policy.bin")]
    out: PathBuf,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SolverArg {
    MctsMax,
    MctsAvg,
    Astar,
    Lee,
}

#[derive(Args)]
struct RouteArgs {
    circuit: PathBuf,
    #[arg(long, value_enum, default_value = "mcts-max")]
    solver: SolverArg,
    #[arg(long, default_value_t = 1000)]
    iterations: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Trained policy; without it the search rolls out randomly.
    #[arg(long)]
    policy: Option<PathBuf>,
    /// Roll out randomly even when a policy is given.
    #[arg(long)]
    random_rollout: bool,
    #[arg(long)]
    render: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    /// Directory of circuit files, read in name order.
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    policy: PathBuf,
    #[arg(long, value_delimiter = ',', default_values_t = STANDARD_BUDGETS.to_vec())]
    budgets: Vec<usize>,
    /// Leave out random-rollout configurations.
    #[arg(long)]
    skip_random: bool,
    #[arg(long)]
    skip_baselines: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Minutes after which no new job starts; unstarted jobs are listed as unfinished.
    #[arg(long)]
    time_limit: Option<f64>,
    /// Machine-readable report; timings go to the same path with `.times`.
    #[arg(long, default_value = "bench.txt")]
    out: PathBuf,
}

#[derive(Debug, Error)]
enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{0}")]
    Input(String),
    #[error("routing failed")]
    RouteFailed,
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::RouteFailed => 1,
            CliError::Usage(_) => 2,
            CliError::Io { .. } | CliError::Input(_) => 3,
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn with_extension(path: &Path, ext: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(ext);
    PathBuf::from(s)
}

fn load_policy(path: &Path) -> Result<CompiledPolicy, CliError> {
    let params = load_params(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    Ok(CompiledPolicy::new(&params))
}

fn generate(args: GenerateArgs) -> Result<(), CliError> {
    let cfg = args.board.config(args.seed);
    cfg.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    let corpus = generate_corpus(&cfg, args.count as usize).map_err(|e| CliError::Input(e.to_string()))?;
    fs::create_dir_all(&args.out).map_err(io_err(&args.out))?;
    for (i, c) in corpus.iter().enumerate() {
        validate_routing(&c.problem, &c.witness).map_err(|e| CliError::Input(format!("circuit {i}: {e}")))?;
        let path = args.out.join(format!("circuit_{i:03}.txt"));
        fs::write(&path, write_circuit(&c.problem)).map_err(io_err(&path))?;
    }
    println!("wrote {} circuits to {}, each with a verified witness routing", corpus.len(), args.out.display());
    Ok(())
}

fn train(args: TrainArgs) -> Result<(), CliError> {
    let parent = args.out.parent().filter(|p| !p.as_os_str().is_empty());
    if let Some(dir) = parent {
        if !dir.is_dir() {
            return Err(CliError::Io {
                path: dir.to_path_buf(),
                source: io::Error::new(io::ErrorKind::NotFound, "output directory does not exist"),
            });
        }
    }
    let generator = args.board.config(args.seed);
    generator.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    let t0 = Instant::now();
    let data = build_dataset(&DatasetConfig {
        circuits: args.circuits as usize,
        generator,
        seed: args.seed,
        fallback_iterations: args.fallback_iterations,
    })
    .map_err(|e| CliError::Input(e.to_string()))?;
    let mut log = format!(
        "dataset circuits {} astar {} reordered {} search {} skipped {} samples {}\n",
        data.circuits,
        data.routed_by_astar,
        data.routed_by_reordering,
        data.routed_by_search,
        data.skipped,
        data.samples.len()
    );
    print!("{log}");
    let (train_set, test_set) = split_dataset(&data.samples, 0.8, args.seed);
    let cfg = TrainConfig {
        learning_rate: args.learning_rate,
        momentum: 0.9,
        batch_size: args.batch_size,
        epochs: args.epochs,
        seed: args.seed,
        augment: !args.no_augment,
        decay: !args.constant_rate,
    };
    let shape = PolicyShape::standard(args.board.size, args.board.size);
    let (params, epochs) = train_with_log(&train_set, &test_set, shape, &cfg, |e| println!("{e}"))
        .map_err(|e| CliError::Input(e.to_string()))?;
    for e in &epochs {
        log.push_str(&format!("{e}\n"));
    }
    let final_acc = epochs.last().map_or(f64::NAN, |e| e.test_accuracy);
    let summary = format!(
        "final test accuracy {final_acc:.4} on {} held-out samples ({:.1} s)",
        test_set.len(),
        t0.elapsed().as_secs_f64()
    );
    println!("{summary}");
    log.push_str(&summary);
    log.push('\n');
    save_params(&params, &args.out).map_err(io_err(&args.out))?;
    let log_path = with_extension(&args.out, ".log");
    fs::write(&log_path, log).map_err(io_err(&log_path))?;
    Ok(())
}

fn route_cmd(args: RouteArgs) -> Result<(), CliError> {
    let text = fs::read_to_string(&args.circuit).map_err(io_err(&args.circuit))?;
    let problem = parse_circuit(&text).map_err(|e| CliError::Input(format!("{}: {e}", args.circuit.display())))?;
    let result = match args.solver {
        SolverArg::Astar => sequential_route(&problem, Algorithm::AStar),
        SolverArg::Lee => sequential_route(&problem, Algorithm::Lee),
        SolverArg::MctsMax | SolverArg::MctsAvg => {
            let policy = match &args.policy {
                Some(p) if !args.random_rollout => Some(load_policy(p)?),
                _ => None,
            };
            let cfg = SearchConfig {
                iterations: args.iterations,
                uct_mode: if args.solver == SolverArg::MctsMax { UctMode::Maximum } else { UctMode::Average },
                rollout_policy: if policy.is_some() { RolloutPolicy::DnnDfs } else { RolloutPolicy::Random },
                seed: args.seed,
                ..SearchConfig::default()
            };
            route(&problem, &cfg, policy.as_ref()).map_err(|e| CliError::Usage(e.to_string()))?
        }
    };
    if result.success {
        validate_routing(&problem, &result.paths).map_err(|e| CliError::Input(format!("invalid routing: {e}")))?;
        println!("success length {} nets {}", result.total_length, problem.net_count());
    } else {
        println!("failed after routing {} of {} nets", result.paths.len(), problem.net_count());
    }
    println!(
        "iterations {} search_calls {} budget_exhausted {} seconds {:.3}",
        result.iterations_used,
        result.search_calls,
        result.budget_exhausted_rollouts,
        result.wall_time.as_secs_f64()
    );
    if let Some(out) = &args.render {
        write_svg(&problem, &result.paths, out).map_err(io_err(out))?;
    }
    if result.success {
        Ok(())
    } else {
        Err(CliError::RouteFailed)
    }
}

fn read_corpus(dir: &Path) -> Result<Vec<circuit_router::grid::RoutingProblem>, CliError> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(io_err(dir))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file())
        .collect();
    files.sort();
    files
        .iter()
        .map(|p| {
            let text = fs::read_to_string(p).map_err(io_err(p))?;
            parse_circuit(&text).map_err(|e| CliError::Input(format!("{}: {e}", p.display())))
        })
        .collect()
}

fn bench(args: BenchArgs) -> Result<(), CliError> {
    let corpus = read_corpus(&args.corpus)?;
    let policy = load_policy(&args.policy)?;
    let threads = match std::env::var("ROUTER_THREADS") {
        Ok(v) => Some(v.parse::<usize>().map_err(|_| CliError::Usage(format!("ROUTER_THREADS={v} is not a count")))?),
        Err(_) => None,
    };
    let time_limit = match args.time_limit {
        Some(m) if !(m.is_finite() && m >= 0.0) => return Err(CliError::Usage(format!("time limit {m} is not a number of minutes"))),
        m => m.map(|m| Duration::from_secs_f64(m * 60.0)),
    };
    let mut cfg = BenchConfig {
        budgets: args.budgets,
        baselines: !args.skip_baselines,
        seed: args.seed,
        threads,
        time_limit,
        ..BenchConfig::default()
    };
    if args.skip_random {
        cfg.rollouts = vec![RolloutPolicy::DnnDfs];
    }
    let t0 = Instant::now();
    let report = run_bench(&corpus, &cfg, Some(&policy)).map_err(|e| CliError::Input(e.to_string()))?;
    print!("{}", report.tables(&cfg));
    println!("total wall time {:.1} s", t0.elapsed().as_secs_f64());
    fs::write(&args.out, report.records()).map_err(io_err(&args.out))?;
    let times = with_extension(&args.out, ".times");
    fs::write(&times, report.timings()).map_err(io_err(&times))?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let result = match cli.command {
        Command::Generate(a) => generate(a),
        Command::Train(a) => train(a),
        Command::Route(a) => route_cmd(a),
        Command::Bench(a) => bench(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::RouteFailed) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}
