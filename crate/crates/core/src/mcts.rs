//! Monte Carlo tree search over routing moves and the net-by-net driver.
//!
//! Each [`search`] call builds a fresh tree below the current state. An
//! iteration descends by UCT score, expands one untried move, evaluates the
//! new node with a rollout, and backs the terminal reward up to the root.
//! Nodes keep both the reward sum and the best reward, so the exploitation
//! term can be the mean ([`UctMode::Average`]) or the maximum
//! ([`UctMode::Maximum`]).
//!
//! # Rollout cache
//!
//! A depth-first rollout is a pure function of the state it starts from. The
//! searcher therefore remembers outcomes by state fingerprint for the length
//! of one [`route`] call, and a node whose move follows the successful trail
//! of its parent's rollout takes over the rest of that trail instead of
//! searching again. Random rollouts are never cached.

use rustc_hash::FxHashMap;
use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::grid::{Action, ActionSet, GridError, MoveEffect, Path, PinSide, RoutingProblem, RoutingState, Status};
use crate::policy::incremental::{CompiledPolicy, PolicyEvaluator};
use crate::policy::PolicyError;
use crate::rng::{derive_seed, stream_rng, Stream};
use crate::rollout::{default_dfs_budget, random_playout, Dfs, Guide, RolloutOutcome};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum UctMode {
    Average,
    Maximum,
}

impl UctMode {
    pub fn name(self) -> &'static str {
        match self {
            UctMode::Average => "avg",
            UctMode::Maximum => "max",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RolloutPolicy {
    Random,
    /// Depth-first rollout ordered by the policy network, or by canonical
    /// action order when no network is supplied.
    DnnDfs,
}

impl RolloutPolicy {
    pub fn name(self) -> &'static str {
        match self {
            RolloutPolicy::Random => "random",
            RolloutPolicy::DnnDfs => "dnn-dfs",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchConfig {
    pub iterations: usize,
    pub exploration_cp: f64,
    pub uct_mode: UctMode,
    pub rollout_policy: RolloutPolicy,
    pub seed: u64,
    /// Node budget of each depth-first rollout; `None` uses four times the
    /// board area.
    pub dfs_budget: Option<usize>,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            iterations: 1000,
            exploration_cp: 0.5,
            uct_mode: UctMode::Maximum,
            rollout_policy: RolloutPolicy::DnnDfs,
            seed: 0,
            dfs_budget: None,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SearchError {
    #[error("iterations must be positive")]
    NoIterations,
    #[error("exploration constant must be positive and finite, got {0}")]
    BadExploration(f64),
    #[error("search needs an unfinished state")]
    Terminal,
    #[error(transparent)]
    Policy(#[from] PolicyError),
    #[error(transparent)]
    Grid(#[from] GridError),
}

impl SearchConfig {
    pub fn validate(&self) -> Result<(), SearchError> {
        if self.iterations == 0 {
            return Err(SearchError::NoIterations);
        }
        if !(self.exploration_cp > 0.0 && self.exploration_cp.is_finite()) {
            return Err(SearchError::BadExploration(self.exploration_cp));
        }
        Ok(())
    }
}

/// Outcome of routing a whole problem.
#[derive(Debug, Clone, PartialEq)]
pub struct RouteResult {
    pub success: bool,
    /// One path per routed net in net order; on failure the partial path of
    /// the stuck net comes last.
    pub paths: Vec<Path>,
    pub total_length: usize,
    pub iterations_used: usize,
    pub search_calls: usize,
    /// Depth-first rollouts that stopped on their node budget.
    pub budget_exhausted_rollouts: usize,
    pub wall_time: Duration,
}

impl RouteResult {
    /// Equality of everything except wall time.
    pub fn same_outcome(&self, other: &RouteResult) -> bool {
        RouteResult {
            wall_time: Duration::ZERO,
            ..self.clone()
        } == RouteResult {
            wall_time: Duration::ZERO,
            ..other.clone()
        }
    }
}

/// Terminal reward: `1 / total length` on success, `1 / area` on failure.
pub fn reward(state: &RoutingState) -> Result<f64, SearchError> {
    match state.status() {
        Status::Success => Ok(1.0 / state.total_wire_length() as f64),
        Status::Failure => Ok(1.0 / state.problem().area() as f64),
        Status::Ongoing => Err(SearchError::Terminal),
    }
}

/// Per-node statistics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NodeStats {
    pub visits: u32,
    pub reward_sum: f64,
    pub reward_max: f64,
}

impl NodeStats {
    pub fn mean(&self) -> f64 {
        if self.visits == 0 {
            0.0
        } else {
            self.reward_sum / self.visits as f64
        }
    }
}

/// UCT priority of a child given its parent's visit count. Unvisited children
/// score infinity.
pub fn uct_score(child: &NodeStats, parent_visits: u32, mode: UctMode, cp: f64) -> f64 {
    if child.visits == 0 {
        return f64::INFINITY;
    }
    let exploit = match mode {
        UctMode::Average => child.mean(),
        UctMode::Maximum => child.reward_max,
    };
    exploit + cp * (2.0 * (parent_visits as f64).ln() / child.visits as f64).sqrt()
}

const NONE: u32 = u32::MAX;

#[derive(Debug, Clone, Copy)]
enum Cached {
    Unknown,
    /// The rollout from this node succeeds by following `trail[offset..]`.
    Trail { trail: u32, offset: u32 },
    /// No completion exists below this node.
    Dead,
    /// The rollout from exactly this state runs out of budget. Children
    /// learn nothing from it.
    Exhausted,
}

#[derive(Debug, Clone)]
struct Node {
    action: Option<Action>,
    parent: u32,
    children: [u32; 4],
    untried: ActionSet,
    stats: NodeStats,
    /// Iterations that ended at this node.
    direct: u32,
    terminal: Option<f64>,
    cached: Cached,
}

struct Trail {
    actions: Vec<Action>,
    reward: f64,
}

/// One node of a finished search tree.
#[derive(Debug, Clone, PartialEq)]
pub struct TreeNode {
    pub action: Option<Action>,
    pub parent: Option<usize>,
    pub children: Vec<usize>,
    pub stats: NodeStats,
    /// Iterations whose evaluation happened at this node: its expansion plus
    /// any later selection of it as a terminal leaf.
    pub direct_visits: u32,
}

/// Snapshot of a search tree, root first.
#[derive(Debug, Clone, PartialEq)]
pub struct SearchTree {
    pub nodes: Vec<TreeNode>,
}

/// Reusable search machinery. Holds the tree arena and the rollout cache.
struct Searcher<'p> {
    guide: Guide<'p>,
    nodes: Vec<Node>,
    trails: Vec<Trail>,
    known: FxHashMap<u64, Cached>,
    dfs: Dfs,
    descent: Vec<MoveEffect>,
    budget_exhausted: usize,
}

impl<'p> Searcher<'p> {
    fn new(guide: Guide<'p>) -> Self {
        Searcher {
            guide,
            nodes: Vec::new(),
            trails: Vec::new(),
            known: FxHashMap::default(),
            dfs: Dfs::new(),
            descent: Vec::new(),
            budget_exhausted: 0,
        }
    }

    fn push_node(&mut self, action: Option<Action>, parent: u32, state: &RoutingState, area: usize) -> u32 {
        let terminal = match state.status() {
            Status::Success => Some(1.0 / state.total_wire_length() as f64),
            Status::Failure => Some(1.0 / area as f64),
            Status::Ongoing => None,
        };
        let untried = if terminal.is_some() { ActionSet::EMPTY } else { state.legal_actions() };
        self.nodes.push(Node {
            action,
            parent,
            children: [NONE; 4],
            untried,
            stats: NodeStats {
                visits: 0,
                reward_sum: 0.0,
                reward_max: 0.0,
            },
            direct: 0,
            terminal,
            cached: Cached::Unknown,
        });
        (self.nodes.len() - 1) as u32
    }

    fn select_child(&self, node: u32, cfg: &SearchConfig) -> u32 {
        let n = &self.nodes[node as usize];
        let mut best = NONE;
        let mut best_score = f64::NEG_INFINITY;
        for &c in n.children.iter().filter(|&&c| c != NONE) {
            let s = uct_score(&self.nodes[c as usize].stats, n.stats.visits, cfg.uct_mode, cfg.exploration_cp);
            if best == NONE || s > best_score {
                best = c;
                best_score = s;
            }
        }
        best
    }

    fn cached_reward(&self, c: Cached, area: usize) -> Option<f64> {
        match c {
            Cached::Unknown => None,
            Cached::Trail { trail, .. } => Some(self.trails[trail as usize].reward),
            Cached::Dead | Cached::Exhausted => Some(1.0 / area as f64),
        }
    }

    /// Rollout cache entry a child inherits from its parent.
    fn inherit(&self, parent: Cached, action: Action) -> Cached {
        match parent {
            Cached::Trail { trail, offset } => {
                let t = &self.trails[trail as usize].actions;
                if t.get(offset as usize) == Some(&action) {
                    Cached::Trail {
                        trail,
                        offset: offset + 1,
                    }
                } else {
                    Cached::Unknown
                }
            }
            Cached::Dead => Cached::Dead,
            Cached::Exhausted | Cached::Unknown => Cached::Unknown,
        }
    }

    fn record(&mut self, out: &RolloutOutcome) -> Cached {
        match out.status {
            Status::Success => {
                self.trails.push(Trail {
                    actions: out.trail.clone(),
                    reward: 1.0 / out.length as f64,
                });
                Cached::Trail {
                    trail: (self.trails.len() - 1) as u32,
                    offset: 0,
                }
            }
            _ if out.budget_exhausted => Cached::Exhausted,
            _ => Cached::Dead,
        }
    }

    /// Runs a full search from `root`, leaving the tree in the arena.
    fn run(&mut self, root: &RoutingState, cfg: &SearchConfig, rng: &mut ChaCha8Rng) -> Result<(), SearchError> {
        cfg.validate()?;
        if root.status() == Status::Success {
            return Err(SearchError::Terminal);
        }
        let area = root.problem().area();
        let budget = cfg.dfs_budget.unwrap_or_else(|| default_dfs_budget(area));
        let mut state = root.clone();
        let mut eval = match (cfg.rollout_policy, self.guide) {
            (RolloutPolicy::DnnDfs, Guide::Policy(net)) => Some(PolicyEvaluator::new(net, &state)?),
            _ => None,
        };
        let distance = matches!(self.guide, Guide::Distance);
        self.nodes.clear();
        self.push_node(None, NONE, &state, area);
        if self.nodes[0].terminal.is_some() {
            return Ok(());
        }
        let cache = cfg.rollout_policy == RolloutPolicy::DnnDfs;
        if cache {
            self.nodes[0].cached = self.known.get(&state.fingerprint()).copied().unwrap_or(Cached::Unknown);
        }

        for _ in 0..cfg.iterations {
            // Selection and expansion.
            self.descent.clear();
            let mut node = 0u32;
            loop {
                let n = &self.nodes[node as usize];
                if n.terminal.is_some() {
                    break;
                }
                if !n.untried.is_empty() {
                    let a = n.untried.nth(rng.gen_range(0..n.untried.len())).expect("non-empty");
                    let parent_cache = n.cached;
                    self.descent.push(state.apply_in_place(a)?);
                    let child = self.push_node(Some(a), node, &state, area);
                    let p = &mut self.nodes[node as usize];
                    p.untried.remove(a);
                    p.children[a.index()] = child;
                    if cache && self.nodes[child as usize].terminal.is_none() {
                        let mut c = self.inherit(parent_cache, a);
                        let fp = state.fingerprint();
                        if let Cached::Unknown = c {
                            c = self.known.get(&fp).copied().unwrap_or(Cached::Unknown);
                        } else {
                            self.known.entry(fp).or_insert(c);
                        }
                        self.nodes[child as usize].cached = c;
                    }
                    node = child;
                    break;
                }
                let c = self.select_child(node, cfg);
                let a = self.nodes[c as usize].action.expect("child has an action");
                self.descent.push(state.apply_in_place(a)?);
                node = c;
            }

            // Evaluation.
            let leaf = &self.nodes[node as usize];
            let r = if let Some(r) = leaf.terminal {
                r
            } else if let Some(r) = self.cached_reward(leaf.cached, area) {
                r
            } else {
                let out = match cfg.rollout_policy {
                    RolloutPolicy::Random => random_playout(&mut state, rng),
                    RolloutPolicy::DnnDfs => {
                        let out = match eval.as_mut() {
                            Some(ev) => {
                                ev.push(&state, self.descent.iter().flat_map(MoveEffect::changed_cells));
                                let out = self.dfs.run(&mut state, Some(ev), false, budget);
                                ev.pop();
                                out
                            }
                            None => self.dfs.run(&mut state, None, distance, budget),
                        };
                        if out.budget_exhausted {
                            self.budget_exhausted += 1;
                        }
                        let c = self.record(&out);
                        if !matches!(c, Cached::Unknown) {
                            self.nodes[node as usize].cached = c;
                            self.known.insert(state.fingerprint(), c);
                        }
                        out
                    }
                };
                match out.status {
                    Status::Success => 1.0 / out.length as f64,
                    _ => 1.0 / area as f64,
                }
            };

            // Backpropagation.
            self.nodes[node as usize].direct += 1;
            let mut at = node;
            while at != NONE {
                let s = &mut self.nodes[at as usize].stats;
                s.visits += 1;
                s.reward_sum += r;
                if r > s.reward_max {
                    s.reward_max = r;
                }
                at = self.nodes[at as usize].parent;
            }
            for fx in self.descent.iter().rev() {
                state.undo(fx);
            }
        }
        Ok(())
    }

    /// Root child with the best decision statistic; ties go to more visits,
    /// then canonical order.
    fn decide(&self, mode: UctMode) -> Option<Action> {
        let root = self.nodes.first()?;
        let mut best: Option<(f64, u32, Action)> = None;
        for &c in root.children.iter().filter(|&&c| c != NONE) {
            let n = &self.nodes[c as usize];
            let stat = match mode {
                UctMode::Average => n.stats.mean(),
                UctMode::Maximum => n.stats.reward_max,
            };
            let a = n.action.expect("child has an action");
            let better = match best {
                None => true,
                Some((s, v, _)) => stat > s || (stat == s && n.stats.visits > v),
            };
            if better {
                best = Some((stat, n.stats.visits, a));
            }
        }
        best.map(|(_, _, a)| a)
    }

    fn snapshot(&self) -> SearchTree {
        SearchTree {
            nodes: self
                .nodes
                .iter()
                .map(|n| TreeNode {
                    action: n.action,
                    parent: (n.parent != NONE).then_some(n.parent as usize),
                    children: n.children.iter().filter(|&&c| c != NONE).map(|&c| c as usize).collect(),
                    stats: n.stats,
                    direct_visits: n.direct,
                })
                .collect(),
        }
    }
}

fn search_rng(seed: u64, call: u64) -> ChaCha8Rng {
    stream_rng(derive_seed(seed, call), Stream::Search)
}

/// One search from `state`: the move to play, or `None` at a dead end.
pub fn search(state: &RoutingState, cfg: &SearchConfig, policy: Option<&CompiledPolicy>) -> Result<Option<Action>, SearchError> {
    Ok(search_with_tree(state, cfg, policy)?.0)
}

/// As [`search`], also returning the final tree.
pub fn search_with_tree(
    state: &RoutingState,
    cfg: &SearchConfig,
    policy: Option<&CompiledPolicy>,
) -> Result<(Option<Action>, SearchTree), SearchError> {
    let mut s = Searcher::new(guide_of(policy));
    s.run(state, cfg, &mut search_rng(cfg.seed, 0))?;
    Ok((s.decide(cfg.uct_mode), s.snapshot()))
}

/// Start pin of every net, drawn once per route call.
pub fn start_sides(net_count: usize, seed: u64) -> Vec<PinSide> {
    let mut rng = stream_rng(seed, Stream::PinChoice);
    (0..net_count)
        .map(|_| if rng.gen_bool(0.5) { PinSide::A } else { PinSide::B })
        .collect()
}

fn guide_of(policy: Option<&CompiledPolicy>) -> Guide<'_> {
    policy.map_or(Guide::Uniform, Guide::Policy)
}

/// Routes every net in order, one search per move. A state with a single
/// legal move plays it without searching. Without a policy the depth-first
/// rollout uses canonical order.
pub fn route(problem: &RoutingProblem, cfg: &SearchConfig, policy: Option<&CompiledPolicy>) -> Result<RouteResult, SearchError> {
    route_guided(problem, cfg, guide_of(policy))
}

/// As [`route`] with an explicit depth-first move ordering.
pub fn route_guided(problem: &RoutingProblem, cfg: &SearchConfig, guide: Guide<'_>) -> Result<RouteResult, SearchError> {
    cfg.validate()?;
    if let (RolloutPolicy::DnnDfs, Guide::Policy(net)) = (cfg.rollout_policy, guide) {
        net.check_board(problem.width(), problem.height())?;
    }
    let t0 = Instant::now();
    let problem = Arc::new(problem.clone());
    let mut state = RoutingState::new(problem.clone(), start_sides(problem.net_count(), cfg.seed))?;
    let mut searcher = Searcher::new(guide);
    let mut iterations_used = 0;
    let mut calls = 0usize;
    let success = loop {
        match state.status() {
            Status::Success => break true,
            Status::Failure => break false,
            Status::Ongoing => {}
        }
        let legal = state.legal_actions();
        let action = if legal.len() == 1 {
            legal.nth(0)
        } else {
            searcher.run(&state, cfg, &mut search_rng(cfg.seed, calls as u64 + 1))?;
            iterations_used += cfg.iterations;
            calls += 1;
            searcher.decide(cfg.uct_mode)
        };
        match action {
            Some(a) => {
                state.apply_in_place(a)?;
            }
            None => break false,
        }
    };
    Ok(RouteResult {
        success,
        paths: state.paths(),
        total_length: state.total_wire_length(),
        iterations_used,
        search_calls: calls,
        budget_exhausted_rollouts: searcher.budget_exhausted,
        wall_time: t0.elapsed(),
    })
}

#[cfg(test)]
mod tests {
    use std::collections::VecDeque;

    use rand::seq::SliceRandom;
    use rand::SeedableRng;

    use super::*;
    use crate::grid::{Net, Point};

    fn problem(w: usize, h: usize, obstacles: &[(usize, usize)], nets: &[(usize, usize, usize, usize)]) -> RoutingProblem {
        RoutingProblem::new(
            w,
            h,
            obstacles.iter().map(|&(x, y)| Point::new(x, y)),
            nets.iter()
                .enumerate()
                .map(|(i, &(a, b, c, d))| Net::new(i + 1, Point::new(a, b), Point::new(c, d)))
                .collect(),
        )
        .unwrap()
    }

    fn cfg(iterations: usize, mode: UctMode, seed: u64) -> SearchConfig {
        SearchConfig {
            iterations,
            uct_mode: mode,
            seed,
            ..SearchConfig::default()
        }
    }

    /// Vertex count of a shortest path by plain breadth-first search.
    fn bfs_vertices(p: &RoutingProblem) -> Option<usize> {
        let net = p.nets()[0];
        let mut dist = vec![usize::MAX; p.area()];
        let mut q = VecDeque::from([net.pin_a]);
        dist[p.index(net.pin_a)] = 1;
        while let Some(c) = q.pop_front() {
            if c == net.pin_b {
                return Some(dist[p.index(c)]);
            }
            for a in Action::ALL {
                if let Some(n) = c.step(a, p.width(), p.height()) {
                    if !p.is_obstacle(n) && dist[p.index(n)] == usize::MAX {
                        dist[p.index(n)] = dist[p.index(c)] + 1;
                        q.push_back(n);
                    }
                }
            }
        }
        None
    }

    #[test]
    fn reward_is_inverse_length_or_inverse_area() {
        let p = Arc::new(problem(3, 1, &[], &[(0, 0, 2, 0)]));
        let mut s = RoutingState::new(p.clone(), vec![PinSide::A]).unwrap();
        assert_eq!(reward(&s), Err(SearchError::Terminal));
        s.apply_in_place(Action::Right).unwrap();
        s.apply_in_place(Action::Right).unwrap();
        assert_eq!(reward(&s).unwrap(), 1.0 / 3.0);
        let trapped = Arc::new(problem(3, 3, &[(1, 0), (0, 1)], &[(0, 0, 2, 2)]));
        let s = RoutingState::new(trapped, vec![PinSide::A]).unwrap();
        assert_eq!(reward(&s).unwrap(), 1.0 / 9.0);
    }

    #[test]
    fn uct_matches_hand_computation() {
        let child = NodeStats {
            visits: 2,
            reward_sum: 1.0,
            reward_max: 0.8,
        };
        let bonus = 0.5 * (2.0 * 10f64.ln() / 2.0).sqrt();
        assert!((uct_score(&child, 10, UctMode::Average, 0.5) - (0.5 + bonus)).abs() < 1e-12);
        assert!((uct_score(&child, 10, UctMode::Maximum, 0.5) - (0.8 + bonus)).abs() < 1e-12);
        let fresh = NodeStats {
            visits: 0,
            reward_sum: 0.0,
            reward_max: 0.0,
        };
        assert_eq!(uct_score(&fresh, 10, UctMode::Maximum, 0.5), f64::INFINITY);
    }

    #[test]
    fn config_is_validated() {
        let p = problem(4, 4, &[], &[(0, 0, 3, 3)]);
        assert_eq!(route(&p, &cfg(0, UctMode::Maximum, 0), None), Err(SearchError::NoIterations));
        let bad = SearchConfig {
            exploration_cp: f64::NAN,
            ..SearchConfig::default()
        };
        assert!(matches!(route(&p, &bad, None), Err(SearchError::BadExploration(_))));
    }

    #[test]
    fn tree_visits_are_conserved() {
        let p = Arc::new(problem(6, 6, &[(2, 2), (3, 3)], &[(0, 0, 5, 5), (5, 0, 0, 5)]));
        let s = RoutingState::initial(p);
        for mode in [UctMode::Average, UctMode::Maximum] {
            for policy in [RolloutPolicy::Random, RolloutPolicy::DnnDfs] {
                let c = SearchConfig {
                    rollout_policy: policy,
                    ..cfg(300, mode, 4)
                };
                let (_, tree) = search_with_tree(&s, &c, None).unwrap();
                assert_eq!(tree.nodes[0].stats.visits, 300);
                for n in &tree.nodes {
                    let below: u32 = n.children.iter().map(|&c| tree.nodes[c].stats.visits).sum();
                    assert_eq!(n.stats.visits, n.direct_visits + below);
                    assert!(n.stats.reward_max <= 1.0 && n.stats.reward_max >= n.stats.mean() - 1e-12);
                    for &c in &n.children {
                        assert!(tree.nodes[c].stats.reward_max <= n.stats.reward_max);
                    }
                }
            }
        }
    }

    #[test]
    fn best_reward_never_drops_with_more_iterations() {
        let p = Arc::new(problem(6, 5, &[(2, 1), (2, 2)], &[(0, 0, 5, 4), (0, 4, 5, 0)]));
        let s = RoutingState::initial(p);
        let (_, short) = search_with_tree(&s, &cfg(60, UctMode::Maximum, 8), None).unwrap();
        let (_, long) = search_with_tree(&s, &cfg(200, UctMode::Maximum, 8), None).unwrap();
        for (i, n) in short.nodes.iter().enumerate() {
            let m = &long.nodes[i];
            assert_eq!(m.action, n.action);
            assert!(m.stats.reward_max >= n.stats.reward_max);
            assert!(m.stats.visits >= n.stats.visits);
        }
    }

    #[test]
    fn dead_end_root_has_no_move_and_finished_root_is_rejected() {
        let trapped = Arc::new(problem(3, 3, &[(1, 0), (0, 1)], &[(0, 0, 2, 2)]));
        let s = RoutingState::new(trapped, vec![PinSide::A]).unwrap();
        assert_eq!(search(&s, &cfg(10, UctMode::Maximum, 0), None).unwrap(), None);
        let line = Arc::new(problem(2, 1, &[], &[(0, 0, 1, 0)]));
        let mut s = RoutingState::new(line, vec![PinSide::A]).unwrap();
        s.apply_in_place(Action::Right).unwrap();
        assert_eq!(search(&s, &cfg(10, UctMode::Maximum, 0), None), Err(SearchError::Terminal));
    }

    #[test]
    fn corridor_needs_no_search() {
        let p = problem(5, 1, &[], &[(0, 0, 4, 0)]);
        let r = route(&p, &cfg(50, UctMode::Maximum, 0), None).unwrap();
        assert!(r.success);
        assert_eq!(r.search_calls, 0);
        assert_eq!(r.total_length, 5);
    }

    #[test]
    fn single_net_route_is_shortest() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let cells: Vec<Point> = (0..5).flat_map(|y| (0..5).map(move |x| Point::new(x, y))).collect();
        let mut checked = 0;
        while checked < 12 {
            let mut c = cells.clone();
            c.shuffle(&mut rng);
            let p = RoutingProblem::new(5, 5, c[2..6].iter().copied(), vec![Net::new(1, c[0], c[1])]).unwrap();
            let Some(best) = bfs_vertices(&p) else { continue };
            for mode in [UctMode::Maximum, UctMode::Average] {
                let r = route(&p, &cfg(200, mode, checked), None).unwrap();
                assert!(r.success);
                assert_eq!(r.total_length, best, "{}", crate::format::write_circuit(&p));
            }
            checked += 1;
        }
    }

    #[test]
    fn route_is_deterministic_and_valid() {
        let p = problem(7, 7, &[(3, 2), (3, 3), (3, 4)], &[(0, 3, 6, 3), (3, 0, 3, 6), (0, 0, 6, 6)]);
        for policy in [RolloutPolicy::Random, RolloutPolicy::DnnDfs] {
            let c = SearchConfig {
                rollout_policy: policy,
                ..cfg(100, UctMode::Maximum, 3)
            };
            let a = route(&p, &c, None).unwrap();
            let b = route(&p, &c, None).unwrap();
            assert!(a.same_outcome(&b));
            if a.success {
                crate::grid::validate_routing(&p, &a.paths).unwrap();
                assert_eq!(a.total_length, a.paths.iter().map(Path::len).sum::<usize>());
            }
        }
    }

    #[test]
    fn start_sides_follow_the_seed() {
        assert_eq!(start_sides(8, 5), start_sides(8, 5));
        assert_ne!(start_sides(32, 5), start_sides(32, 6));
    }
}
