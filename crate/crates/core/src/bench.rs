//! Benchmark harness: success rates and wire redundancy of every solver
//! configuration over a corpus.
//!
//! Rows come out in a fixed order whatever the thread count. Redundancy is
//! `(L_r - L_s) / L_s * 100` with `L_s` the per-net shortest-path bound; the
//! per-budget means use only circuits that both depth-first configurations
//! (average and maximum UCT) routed.

use std::fmt::Write as _;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::{Duration, Instant};

use thiserror::Error;

use crate::baselines::{best_order_route, sequential_route, shortest_length_lower_bound, Algorithm, BaselineError, ORDERING_MAX_NETS};
use crate::grid::{validate_routing, GridError, RoutingProblem};
use crate::mcts::{route, RolloutPolicy, RouteResult, SearchConfig, SearchError, UctMode};
use crate::policy::incremental::CompiledPolicy;
use crate::rng::derive_seed;

/// Iteration budgets of the standard sweep.
pub const STANDARD_BUDGETS: [usize; 6] = [100, 200, 500, 1000, 2000, 5000];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Solver {
    Mcts { uct: UctMode, rollout: RolloutPolicy, iterations: usize },
    /// Sequential routing in net order.
    Sequential(Algorithm),
    /// Sequential routing under the first net order that succeeds.
    BestOrder(Algorithm),
}

impl Solver {
    pub fn label(&self) -> String {
        match self {
            Solver::Mcts { uct, rollout, iterations } => format!("mcts-{}-{} {}", rollout.name(), uct.name(), iterations),
            Solver::Sequential(a) => a.name().to_string(),
            Solver::BestOrder(a) => format!("{}-best-order", a.name()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchConfig {
    pub budgets: Vec<usize>,
    pub rollouts: Vec<RolloutPolicy>,
    pub modes: Vec<UctMode>,
    pub baselines: bool,
    pub seed: u64,
    pub exploration_cp: f64,
    pub dfs_budget: Option<usize>,
    /// Worker threads; `None` lets rayon decide.
    pub threads: Option<usize>,
    /// Jobs not started within this time are left out of the report and
    /// listed in [`BenchReport::unfinished`]. Cheap jobs run first.
    pub time_limit: Option<Duration>,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            budgets: STANDARD_BUDGETS.to_vec(),
            rollouts: vec![RolloutPolicy::Random, RolloutPolicy::DnnDfs],
            modes: vec![UctMode::Average, UctMode::Maximum],
            baselines: true,
            seed: 0,
            exploration_cp: 0.5,
            dfs_budget: None,
            threads: None,
            time_limit: None,
        }
    }
}

impl BenchConfig {
    /// Solver list in report order.
    pub fn solvers(&self) -> Vec<Solver> {
        let mut v = Vec::new();
        for &rollout in &self.rollouts {
            for &uct in &self.modes {
                for &iterations in &self.budgets {
                    v.push(Solver::Mcts { uct, rollout, iterations });
                }
            }
        }
        if self.baselines {
            for a in [Algorithm::AStar, Algorithm::Lee] {
                v.push(Solver::Sequential(a));
                v.push(Solver::BestOrder(a));
            }
        }
        v
    }
}

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("the corpus is empty")]
    EmptyCorpus,
    #[error("circuit {circuit}: {source}")]
    Search { circuit: usize, source: SearchError },
    #[error("circuit {circuit}: {source}")]
    Baseline { circuit: usize, source: BaselineError },
    #[error("circuit {circuit}, {solver}: reported routing is invalid: {source}")]
    InvalidRouting { circuit: usize, solver: String, source: GridError },
    #[error("thread pool: {0}")]
    Threads(String),
}

/// One solver on one circuit.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub circuit: usize,
    pub solver: Solver,
    /// `None` for best-order baselines on circuits with too many nets.
    pub success: Option<bool>,
    pub total_length: usize,
    pub lower_bound: usize,
    pub search_calls: usize,
    pub budget_exhausted: usize,
    pub wall_time: Duration,
}

impl BenchRow {
    /// Redundancy percentage of a successful routing.
    pub fn redundancy(&self) -> Option<f64> {
        (self.success == Some(true))
            .then(|| (self.total_length as f64 - self.lower_bound as f64) / self.lower_bound as f64 * 100.0)
    }

    /// Stable line-delimited record, without timing.
    pub fn record(&self) -> String {
        let (kind, uct, rollout, iterations) = match self.solver {
            Solver::Mcts { uct, rollout, iterations } => ("mcts", uct.name(), rollout.name(), iterations),
            Solver::Sequential(a) => (a.name(), "-", "-", 0),
            Solver::BestOrder(a) => (if a == Algorithm::AStar { "astar-best" } else { "lee-best" }, "-", "-", 0),
        };
        let success = match self.success {
            Some(true) => "1",
            Some(false) => "0",
            None => "na",
        };
        let redundancy = self.redundancy().map_or("na".to_string(), |r| format!("{r:.6}"));
        format!(
            "row circuit={} solver={kind} uct={uct} rollout={rollout} iterations={iterations} success={success} length={} lower_bound={} redundancy={redundancy} search_calls={} budget_exhausted={}",
            self.circuit, self.total_length, self.lower_bound, self.search_calls, self.budget_exhausted
        )
    }
}

/// Success rate of one solver over the corpus.
#[derive(Debug, Clone, PartialEq)]
pub struct SuccessAggregate {
    pub solver: Solver,
    pub attempted: usize,
    pub succeeded: usize,
}

impl SuccessAggregate {
    pub fn rate(&self) -> f64 {
        if self.attempted == 0 {
            f64::NAN
        } else {
            self.succeeded as f64 / self.attempted as f64 * 100.0
        }
    }
}

/// Mean redundancy of one depth-first configuration at one budget over the
/// circuits every compared configuration routed.
#[derive(Debug, Clone, PartialEq)]
pub struct RedundancyAggregate {
    pub uct: UctMode,
    pub iterations: usize,
    pub circuits: usize,
    pub mean: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchReport {
    pub circuits: usize,
    pub rows: Vec<BenchRow>,
    pub success: Vec<SuccessAggregate>,
    pub redundancy: Vec<RedundancyAggregate>,
    /// `(circuit, solver)` jobs cut by the time limit, in report order.
    pub unfinished: Vec<(usize, Solver)>,
}

/// Rough cost rank: baselines, then searches by budget, random rollouts
/// before depth-first ones.
fn cost_rank(solver: Solver) -> (usize, usize) {
    match solver {
        Solver::Sequential(_) | Solver::BestOrder(_) => (0, 0),
        Solver::Mcts { rollout, iterations, .. } => (iterations, usize::from(rollout == RolloutPolicy::DnnDfs)),
    }
}

fn run_one(problem: &RoutingProblem, circuit: usize, solver: Solver, cfg: &BenchConfig, policy: Option<&CompiledPolicy>, lower_bound: usize) -> Result<BenchRow, BenchError> {
    let result: Option<RouteResult> = match solver {
        Solver::Mcts { uct, rollout, iterations } => {
            let search = SearchConfig {
                iterations,
                exploration_cp: cfg.exploration_cp,
                uct_mode: uct,
                rollout_policy: rollout,
                seed: derive_seed(cfg.seed, circuit as u64),
                dfs_budget: cfg.dfs_budget,
            };
            Some(route(problem, &search, policy).map_err(|source| BenchError::Search { circuit, source })?)
        }
        Solver::Sequential(a) => Some(sequential_route(problem, a)),
        Solver::BestOrder(a) => {
            if problem.net_count() > ORDERING_MAX_NETS {
                None
            } else {
                let found = best_order_route(problem, a).map_err(|source| BenchError::Baseline { circuit, source })?;
                Some(found.map(|(_, r)| r).unwrap_or_else(|| sequential_route(problem, a)))
            }
        }
    };
    let Some(r) = result else {
        return Ok(BenchRow {
            circuit,
            solver,
            success: None,
            total_length: 0,
            lower_bound,
            search_calls: 0,
            budget_exhausted: 0,
            wall_time: Duration::ZERO,
        });
    };
    if r.success {
        validate_routing(problem, &r.paths).map_err(|source| BenchError::InvalidRouting {
            circuit,
            solver: solver.label(),
            source,
        })?;
    }
    Ok(BenchRow {
        circuit,
        solver,
        success: Some(r.success),
        total_length: r.total_length,
        lower_bound,
        search_calls: r.search_calls,
        budget_exhausted: r.budget_exhausted_rollouts,
        wall_time: r.wall_time,
    })
}

/// Runs every configured solver on every circuit.
pub fn run_bench(corpus: &[RoutingProblem], cfg: &BenchConfig, policy: Option<&CompiledPolicy>) -> Result<BenchReport, BenchError> {
    if corpus.is_empty() {
        return Err(BenchError::EmptyCorpus);
    }
    let bounds = corpus
        .iter()
        .enumerate()
        .map(|(i, p)| shortest_length_lower_bound(p).map_err(|source| BenchError::Baseline { circuit: i, source }))
        .collect::<Result<Vec<_>, _>>()?;
    let solvers = cfg.solvers();
    let mut jobs: Vec<(usize, Solver)> = (0..corpus.len())
        .flat_map(|c| solvers.iter().map(move |&s| (c, s)))
        .collect();
    jobs.sort_by_key(|&(c, s)| (cost_rank(s), c));
    let start = Instant::now();
    let next = AtomicUsize::new(0);
    let done: Mutex<Vec<Option<Result<BenchRow, BenchError>>>> = Mutex::new((0..jobs.len()).map(|_| None).collect());
    let work = || {
        rayon::scope(|scope| {
            for _ in 0..rayon::current_num_threads() {
                scope.spawn(|_| loop {
                    if cfg.time_limit.is_some_and(|t| start.elapsed() >= t) {
                        break;
                    }
                    let i = next.fetch_add(1, Ordering::Relaxed);
                    let Some(&(c, s)) = jobs.get(i) else { break };
                    let row = run_one(&corpus[c], c, s, cfg, policy, bounds[c]);
                    done.lock().expect("no worker panicked")[i] = Some(row);
                });
            }
        })
    };
    match cfg.threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .map_err(|e| BenchError::Threads(e.to_string()))?
            .install(work),
        None => work(),
    }
    let mut rows = Vec::with_capacity(jobs.len());
    let mut unfinished = Vec::new();
    for (job, row) in jobs.iter().zip(done.into_inner().expect("no worker panicked")) {
        match row {
            Some(r) => rows.push(r?),
            None => unfinished.push(*job),
        }
    }
    let order = |&(c, s): &(usize, Solver)| (solvers.iter().position(|x| *x == s), c);
    unfinished.sort_by_key(order);
    // Solver-major order mirrors the tables.
    rows.sort_by_key(|r| order(&(r.circuit, r.solver)));
    let mut report = summarize(corpus.len(), rows, cfg);
    report.unfinished = unfinished;
    Ok(report)
}

/// Recomputes the aggregates of a report from its rows; `unfinished` stays
/// empty.
pub fn summarize(circuits: usize, rows: Vec<BenchRow>, cfg: &BenchConfig) -> BenchReport {
    let solvers = cfg.solvers();
    let success = solvers
        .iter()
        .map(|&s| {
            let mine: Vec<&BenchRow> = rows.iter().filter(|r| r.solver == s && r.success.is_some()).collect();
            SuccessAggregate {
                solver: s,
                attempted: mine.len(),
                succeeded: mine.iter().filter(|r| r.success == Some(true)).count(),
            }
        })
        .collect();
    let mut redundancy = Vec::new();
    if cfg.rollouts.contains(&RolloutPolicy::DnnDfs) {
        for &iterations in &cfg.budgets {
            let routed_by_all = |c: usize| {
                cfg.modes.iter().all(|&uct| {
                    rows.iter().any(|r| {
                        r.circuit == c
                            && r.success == Some(true)
                            && r.solver
                                == Solver::Mcts {
                                    uct,
                                    rollout: RolloutPolicy::DnnDfs,
                                    iterations,
                                }
                    })
                })
            };
            let common: Vec<usize> = (0..circuits).filter(|&c| routed_by_all(c)).collect();
            for &uct in &cfg.modes {
                let vals: Vec<f64> = rows
                    .iter()
                    .filter(|r| {
                        common.contains(&r.circuit)
                            && r.solver
                                == Solver::Mcts {
                                    uct,
                                    rollout: RolloutPolicy::DnnDfs,
                                    iterations,
                                }
                    })
                    .filter_map(BenchRow::redundancy)
                    .collect();
                let mean = if vals.is_empty() { f64::NAN } else { vals.iter().sum::<f64>() / vals.len() as f64 };
                redundancy.push(RedundancyAggregate {
                    uct,
                    iterations,
                    circuits: common.len(),
                    mean,
                });
            }
        }
    }
    BenchReport {
        circuits,
        rows,
        success,
        redundancy,
        unfinished: Vec::new(),
    }
}

impl BenchReport {
    pub fn success_of(&self, solver: Solver) -> Option<&SuccessAggregate> {
        self.success.iter().find(|a| a.solver == solver)
    }

    pub fn redundancy_of(&self, uct: UctMode, iterations: usize) -> Option<&RedundancyAggregate> {
        self.redundancy.iter().find(|a| a.uct == uct && a.iterations == iterations)
    }

    /// Machine-readable report: every row, then the aggregates.
    pub fn records(&self) -> String {
        let mut s = String::new();
        writeln!(s, "bench circuits={}", self.circuits).expect("string write");
        for r in &self.rows {
            writeln!(s, "{}", r.record()).expect("string write");
        }
        for (c, solver) in &self.unfinished {
            writeln!(s, "unfinished circuit={c} solver=\"{}\"", solver.label()).expect("string write");
        }
        for a in &self.success {
            writeln!(
                s,
                "success solver=\"{}\" attempted={} succeeded={} rate={:.2}",
                a.solver.label(),
                a.attempted,
                a.succeeded,
                a.rate()
            )
            .expect("string write");
        }
        for a in &self.redundancy {
            writeln!(
                s,
                "redundancy uct={} iterations={} circuits={} mean={:.4}",
                a.uct.name(),
                a.iterations,
                a.circuits,
                a.mean
            )
            .expect("string write");
        }
        s
    }

    /// Wall time of each row, in row order.
    pub fn timings(&self) -> String {
        let mut s = String::new();
        for r in &self.rows {
            writeln!(s, "time circuit={} solver=\"{}\" seconds={:.3}", r.circuit, r.solver.label(), r.wall_time.as_secs_f64())
                .expect("string write");
        }
        s
    }

    /// Human-readable success and redundancy tables.
    pub fn tables(&self, cfg: &BenchConfig) -> String {
        let mut s = String::new();
        let header: String = cfg.budgets.iter().map(|b| format!("{b:>9}")).collect();
        writeln!(s, "Success rate (%) over {} circuits", self.circuits).expect("string write");
        writeln!(s, "{:<22}{header}", "rollout / uct").expect("string write");
        for &rollout in &cfg.rollouts {
            for &uct in &cfg.modes {
                let cells: String = cfg
                    .budgets
                    .iter()
                    .map(|&iterations| {
                        let rate = self.success_of(Solver::Mcts { uct, rollout, iterations }).map_or(f64::NAN, |a| a.rate());
                        format!("{rate:>9.2}")
                    })
                    .collect();
                writeln!(s, "{:<22}{cells}", format!("{} / {}", rollout.name(), uct.name())).expect("string write");
            }
        }
        if cfg.baselines {
            writeln!(s).expect("string write");
            for a in self.success.iter().filter(|a| !matches!(a.solver, Solver::Mcts { .. })) {
                writeln!(s, "{:<22}{:>9.2}  ({} of {})", a.solver.label(), a.rate(), a.succeeded, a.attempted)
                    .expect("string write");
            }
        }
        if !self.redundancy.is_empty() {
            writeln!(s).expect("string write");
            writeln!(s, "Mean wire redundancy (%) of dnn-dfs over commonly routed circuits").expect("string write");
            writeln!(s, "{:<22}{header}", "uct").expect("string write");
            for &uct in &cfg.modes {
                let cells: String = cfg
                    .budgets
                    .iter()
                    .map(|&b| format!("{:>9.2}", self.redundancy_of(uct, b).map_or(f64::NAN, |a| a.mean)))
                    .collect();
                writeln!(s, "{:<22}{cells}", uct.name()).expect("string write");
            }
            let sizes: String = cfg
                .budgets
                .iter()
                .map(|&b| format!("{:>9}", self.redundancy_of(cfg.modes[0], b).map_or(0, |a| a.circuits)))
                .collect();
            writeln!(s, "{:<22}{sizes}", "circuits").expect("string write");
        }
        if !self.unfinished.is_empty() {
            writeln!(s).expect("string write");
            writeln!(s, "{} jobs did not start within the time limit; their rates cover fewer circuits", self.unfinished.len())
                .expect("string write");
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generator::{generate_corpus, GeneratorConfig};

    fn small() -> (Vec<RoutingProblem>, BenchConfig) {
        let corpus = generate_corpus(&GeneratorConfig::new(8, 3).with_nets(2), 3)
            .unwrap()
            .into_iter()
            .map(|c| c.problem)
            .collect();
        let cfg = BenchConfig {
            budgets: vec![5, 20],
            seed: 1,
            ..BenchConfig::default()
        };
        (corpus, cfg)
    }

    #[test]
    fn aggregates_recompute_from_rows() {
        let (corpus, cfg) = small();
        let report = run_bench(&corpus, &cfg, None).unwrap();
        assert_eq!(report.rows.len(), corpus.len() * cfg.solvers().len());
        let again = summarize(report.circuits, report.rows.clone(), &cfg);
        assert_eq!(again, report);
        for r in &report.rows {
            if let Some(red) = r.redundancy() {
                assert!(red >= 0.0);
            }
        }
    }

    #[test]
    fn report_is_independent_of_threads() {
        let (corpus, mut cfg) = small();
        cfg.threads = Some(1);
        let a = run_bench(&corpus, &cfg, None).unwrap();
        cfg.threads = Some(3);
        let b = run_bench(&corpus, &cfg, None).unwrap();
        assert_eq!(a.records(), b.records());
    }

    #[test]
    fn time_limit_leaves_jobs_unfinished() {
        let (corpus, mut cfg) = small();
        cfg.time_limit = Some(Duration::ZERO);
        let r = run_bench(&corpus, &cfg, None).unwrap();
        assert!(r.rows.is_empty());
        assert_eq!(r.unfinished.len(), corpus.len() * cfg.solvers().len());
        assert!(r.success.iter().all(|a| a.attempted == 0));
        assert!(r.records().contains("unfinished circuit=0"));
        cfg.time_limit = Some(Duration::from_secs(3600));
        assert!(run_bench(&corpus, &cfg, None).unwrap().unfinished.is_empty());
    }

    #[test]
    fn empty_corpus_is_an_error() {
        assert!(matches!(run_bench(&[], &BenchConfig::default(), None), Err(BenchError::EmptyCorpus)));
    }
}
