//! Simulation policies: uniform random playouts and the policy-guided
//! depth-first rollout.
//!
//! The depth-first rollout orders the legal moves of every state by the
//! network's renormalized probabilities, backtracks out of dead ends, and
//! keeps going across net boundaries until every net is connected. States
//! whose subtree was exhausted are remembered by fingerprint for the rest of
//! the rollout, so no state is entered twice.

use rustc_hash::FxHashSet;

use rand::Rng;

use crate::grid::{Action, ActionSet, MoveEffect, Point, RoutingState, Status};
use crate::policy::incremental::{CompiledPolicy, PolicyEvaluator};
use crate::policy::{PolicyError, ACTIONS};

/// Rescales `probs` over the legal actions so they sum to one. A zero legal
/// mass falls back to uniform. Entries come back in canonical order.
pub fn normalize_policy(probs: [f64; ACTIONS], legal: ActionSet) -> Result<Vec<(Action, f64)>, PolicyError> {
    if legal.is_empty() {
        return Err(PolicyError::NoLegalActions);
    }
    let sum: f64 = legal.iter().map(|a| probs[a.index()]).sum();
    let n = legal.len() as f64;
    Ok(legal
        .iter()
        .map(|a| {
            let p = if sum > 0.0 { probs[a.index()] / sum } else { 1.0 / n };
            (a, p)
        })
        .collect())
}

/// Legal actions by descending probability; ties keep canonical order.
fn ranked(probs: [f64; ACTIONS], legal: ActionSet) -> ([Action; ACTIONS], usize) {
    let mut out = [Action::Up; ACTIONS];
    let mut weights = normalize_policy(probs, legal).expect("caller checks for dead ends");
    weights.sort_by(|a, b| b.1.total_cmp(&a.1));
    for (slot, (a, _)) in out.iter_mut().zip(&weights) {
        *slot = *a;
    }
    (out, weights.len())
}

/// Where a rollout ended.
#[derive(Debug, Clone, PartialEq)]
pub struct RolloutOutcome {
    /// `Success` or `Failure`.
    pub status: Status,
    /// Total wire length of the returned state.
    pub length: usize,
    /// Moves from the start state to the returned state.
    pub trail: Vec<Action>,
    /// States entered, the start state excluded.
    pub expansions: usize,
    /// The depth-first search stopped on its node budget rather than by
    /// exhausting the reachable states.
    pub budget_exhausted: bool,
}

impl RolloutOutcome {
    /// Replays the trail from `start`.
    pub fn replay(&self, start: &RoutingState) -> RoutingState {
        let mut s = start.clone();
        for &a in &self.trail {
            s.apply_in_place(a).expect("recorded trail is legal");
        }
        s
    }
}

/// Plays uniformly random legal moves until the routing succeeds or gets
/// stuck, then restores `state`.
pub(crate) fn random_playout(state: &mut RoutingState, rng: &mut impl Rng) -> RolloutOutcome {
    let mut effects: Vec<MoveEffect> = Vec::new();
    let mut trail = Vec::new();
    let status = loop {
        if state.current_net().is_none() {
            break Status::Success;
        }
        let legal = state.legal_actions();
        if legal.is_empty() {
            break Status::Failure;
        }
        let a = legal.nth(rng.gen_range(0..legal.len())).expect("index below len");
        effects.push(state.apply_in_place(a).expect("legal move"));
        trail.push(a);
    };
    let length = state.total_wire_length();
    for fx in effects.iter().rev() {
        state.undo(fx);
    }
    RolloutOutcome {
        status,
        length,
        expansions: trail.len(),
        trail,
        budget_exhausted: false,
    }
}

/// Random playout from `state`; returns the terminal state.
pub fn random_rollout(state: &RoutingState, rng: &mut impl Rng) -> RoutingState {
    let mut s = state.clone();
    let out = random_playout(&mut s, rng);
    out.replay(state)
}

/// Default depth-first node budget: four times the board area.
pub fn default_dfs_budget(area: usize) -> usize {
    4 * area
}

/// Move ordering source for the depth-first rollout.
#[derive(Debug, Clone, Copy)]
pub enum Guide<'a> {
    /// Canonical action order.
    Uniform,
    /// Closest to the current target first, then canonical order.
    Distance,
    Policy(&'a CompiledPolicy),
}

struct Frame {
    reach: ReachUndo,
    effect: Option<MoveEffect>,
    order: [Action; ACTIONS],
    len: u8,
    next: u8,
    /// The evaluator reflects this state.
    synced: bool,
    /// Evaluator depth while this frame is on top.
    ev_depth: usize,
}

/// Scores that rank moves by the Manhattan distance they leave to the target.
fn distance_scores(state: &RoutingState, legal: ActionSet) -> [f64; ACTIONS] {
    let mut out = [0.0; ACTIONS];
    let (Some(head), Some(target)) = (state.head(), state.target()) else {
        return out;
    };
    let (w, h) = (state.problem().width(), state.problem().height());
    for a in legal.iter() {
        if let Some(p) = head.step(a, w, h) {
            out[a.index()] = 1.0 / (1.0 + p.manhattan(target) as f64);
        }
    }
    out
}

/// Connected components of the free cells that are not pins, maintained
/// along the depth-first path.
#[derive(Default)]
struct Reach {
    label: Vec<u32>,
    next_label: u32,
    /// `(cell, previous label)` in change order.
    log: Vec<(usize, u32)>,
    mark: Vec<u32>,
    stamp: u32,
    floods: [Vec<usize>; 4],
    queue: Vec<usize>,
    /// Later nets need rechecking: labels split or a pin lost a neighbour.
    stale: bool,
}

/// Log position to rewind to when leaving a cell.
#[derive(Debug, Clone, Copy)]
struct ReachUndo(usize);

fn plain(state: &RoutingState, i: usize) -> bool {
    !state.is_blocked_at(i) && state.problem().pin_owner_at(i) == 0
}

fn find(root: &[usize; 4], mut f: usize) -> usize {
    while root[f] != f {
        f = root[f];
    }
    f
}

/// Ring order: N, NE, E, SE, S, SW, W, NW.
const RING: [(isize, isize); 8] = [(0, 1), (1, 1), (1, 0), (1, -1), (0, -1), (-1, -1), (-1, 0), (-1, 1)];

impl Reach {
    fn reset(&mut self, state: &RoutingState) {
        self.log.clear();
        self.relabel(state);
        self.mark.clear();
        self.mark.resize(state.problem().area(), 0);
        self.stamp = 0;
        self.stale = true;
    }

    fn relabel(&mut self, state: &RoutingState) {
        let p = state.problem();
        let (w, h) = (p.width(), p.height());
        self.label.clear();
        self.label.resize(p.area(), 0);
        let mut next = 0;
        for s in 0..p.area() {
            if self.label[s] != 0 || !plain(state, s) {
                continue;
            }
            next += 1;
            self.label[s] = next;
            self.queue.clear();
            self.queue.push(s);
            while let Some(i) = self.queue.pop() {
                let (x, y) = (i % w, i / w);
                let around = [
                    (y + 1 < h).then(|| i + w),
                    (y > 0).then(|| i - w),
                    (x > 0).then(|| i - 1),
                    (x + 1 < w).then(|| i + 1),
                ];
                for j in around.into_iter().flatten() {
                    if self.label[j] == 0 && plain(state, j) {
                        self.label[j] = next;
                        self.queue.push(j);
                    }
                }
            }
        }
        self.next_label = next + 1;
    }

    /// One side neighbour of `c` from each run of free cells around it. Runs
    /// are connected inside the 3x3 window; different runs may not be.
    fn side_groups(&self, state: &RoutingState, c: Point) -> ([usize; 4], usize) {
        let p = state.problem();
        let (w, h) = (p.width() as isize, p.height() as isize);
        let mut open = [None; 8];
        for (o, &(dx, dy)) in open.iter_mut().zip(&RING) {
            let (x, y) = (c.x as isize + dx, c.y as isize + dy);
            if x >= 0 && y >= 0 && x < w && y < h {
                let i = (y * w + x) as usize;
                if self.label[i] != 0 {
                    *o = Some(i);
                }
            }
        }
        let mut reps = [0; 4];
        let mut n = 0;
        let Some(start) = open.iter().position(Option::is_none) else {
            return (reps, 0);
        };
        let mut run_rep = None;
        for step in 1..=8 {
            let k = (start + step) % 8;
            match open[k] {
                Some(i) => {
                    if k % 2 == 0 && run_rep.is_none() {
                        run_rep = Some(i);
                    }
                }
                None => {
                    if let Some(r) = run_rep.take() {
                        reps[n] = r;
                        n += 1;
                    }
                }
            }
        }
        (reps, n)
    }

    fn set(&mut self, i: usize, l: u32) {
        self.log.push((i, self.label[i]));
        self.label[i] = l;
    }

    /// Blocks plain cell `to` and splits its component if that cut it.
    fn enter(&mut self, state: &RoutingState, to: Point) -> ReachUndo {
        let undo = ReachUndo(self.log.len());
        let p = state.problem();
        let i = p.index(to);
        self.stale = false;
        if self.label[i] == 0 {
            return undo;
        }
        self.set(i, 0);
        self.stale = Action::ALL
            .iter()
            .filter_map(|&a| to.step(a, p.width(), p.height()))
            .any(|q| p.pin_owner_at(p.index(q)) != 0);
        let (reps, n) = self.side_groups(state, to);
        if n >= 2 {
            let before = self.log.len();
            self.split(state, &reps[..n]);
            self.stale |= self.log.len() > before;
        }
        undo
    }

    /// Floods from every group in lockstep. Floods that meet are one
    /// component; a flood that dies out before the last survivor is cut off
    /// and gets a fresh label.
    fn split(&mut self, state: &RoutingState, reps: &[usize]) {
        let p = state.problem();
        let (w, h) = (p.width(), p.height());
        if self.stamp > u32::MAX - 8 {
            self.mark.fill(0);
            self.stamp = 0;
        }
        let base = self.stamp + 1;
        self.stamp += reps.len() as u32;
        let mut root = [0usize, 1, 2, 3];
        let mut heads = [0usize; 4];
        for (f, &r) in reps.iter().enumerate() {
            self.floods[f].clear();
            self.floods[f].push(r);
            self.mark[r] = base + f as u32;
        }
        let n = reps.len();
        let mut done = 0u8;
        let mut changed = true;
        loop {
            if !changed {
                for g in 0..n {
                    if heads[g] < self.floods[g].len() {
                        self.step(g, base, n, &mut root, w, h, &mut heads, &mut changed);
                    }
                }
                continue;
            }
            changed = false;
            let mut sets = 0u8;
            let mut growing = 0u8;
            for g in 0..n {
                let r = find(&root, g);
                if done & (1 << r) != 0 {
                    continue;
                }
                sets |= 1 << r;
                if heads[g] < self.floods[g].len() {
                    growing |= 1 << r;
                }
            }
            if sets.count_ones() <= 1 {
                break;
            }
            if growing != sets {
                // A set that stopped growing is a closed component.
                for f in (0..n).filter(|&f| (sets & !growing) & (1 << f) != 0) {
                    done |= 1 << f;
                    let l = self.next_label;
                    self.next_label += 1;
                    for g in (0..n).filter(|&g| find(&root, g) == f) {
                        for k in 0..self.floods[g].len() {
                            let c = self.floods[g][k];
                            self.set(c, l);
                        }
                    }
                }
                changed = true;
            }
        }
    }

    /// Expands flood `g` by one cell.
    #[allow(clippy::too_many_arguments)]
    #[inline]
    fn step(&mut self, g: usize, base: u32, n: usize, root: &mut [usize; 4], w: usize, h: usize, heads: &mut [usize; 4], changed: &mut bool) {
        let c = self.floods[g][heads[g]];
        heads[g] += 1;
        let (x, y) = (c % w, c / w);
        let around = [
            (y + 1 < h).then(|| c + w),
            (y > 0).then(|| c - w),
            (x > 0).then(|| c - 1),
            (x + 1 < w).then(|| c + 1),
        ];
        for j in around.into_iter().flatten() {
            if self.label[j] == 0 {
                continue;
            }
            let m = self.mark[j];
            if m >= base && m < base + n as u32 {
                let (a, b) = (find(root, g), find(root, (m - base) as usize));
                if a != b {
                    root[a.max(b)] = a.min(b);
                    *changed = true;
                }
            } else {
                self.mark[j] = base + g as u32;
                self.floods[g].push(j);
            }
        }
        if heads[g] == self.floods[g].len() {
            *changed = true;
        }
    }

    fn leave(&mut self, undo: ReachUndo) {
        while self.log.len() > undo.0 {
            let (i, l) = self.log.pop().expect("log entry");
            self.label[i] = l;
        }
    }

    /// False when the head can no longer reach its target or the pins of a
    /// later net are separated. Any completion would need such a path, so a
    /// false answer proves the state dead.
    fn viable(&self, state: &RoutingState) -> bool {
        let p = state.problem();
        let (w, h) = (p.width(), p.height());
        let touching = |pt: Point| {
            let mut out = [0u32; 4];
            for (slot, a) in out.iter_mut().zip(Action::ALL) {
                if let Some(q) = pt.step(a, w, h) {
                    *slot = self.label[p.index(q)];
                }
            }
            out
        };
        let joined = |a: Point, b: Point| {
            if a.manhattan(b) == 1 {
                return true;
            }
            let (la, lb) = (touching(a), touching(b));
            la.iter().any(|&l| l != 0 && lb.contains(&l))
        };
        let (Some(head), Some(target)) = (state.head(), state.target()) else {
            return true;
        };
        joined(head, target)
            && (!self.stale || p.nets()[state.current_net_index() + 1..]
                .iter()
                .all(|n| joined(n.pin_a, n.pin_b)))
    }
}

/// Reusable depth-first rollout engine.
pub(crate) struct Dfs {
    exhausted: FxHashSet<u64>,
    stack: Vec<Frame>,
    cells: Vec<Point>,
    reach: Reach,
    /// Cut subtrees that [`Reach::viable`] proves dead.
    prune: bool,
    trace: Option<Vec<u64>>,
}

impl Default for Dfs {
    fn default() -> Self {
        Dfs {
            exhausted: FxHashSet::default(),
            stack: Vec::new(),
            cells: Vec::new(),
            reach: Reach::default(),
            prune: true,
            trace: None,
        }
    }
}

impl Dfs {
    pub(crate) fn new() -> Self {
        Dfs::default()
    }

    /// Runs one rollout from `state` and restores it afterwards. When given,
    /// `eval` must describe `state` and is restored as well. The network is
    /// consulted only in states with a choice; the evaluator catches up on
    /// skipped moves in one update.
    pub(crate) fn run(
        &mut self,
        state: &mut RoutingState,
        mut eval: Option<&mut PolicyEvaluator<'_>>,
        distance: bool,
        budget: usize,
    ) -> RolloutOutcome {
        let fallback = |state: &RoutingState, legal: ActionSet| {
            if distance {
                distance_scores(state, legal)
            } else {
                [0.25; ACTIONS]
            }
        };
        self.exhausted.clear();
        self.stack.clear();
        if state.current_net().is_none() {
            return outcome(Status::Success, state.total_wire_length(), Vec::new(), 0, false);
        }
        let legal = state.legal_actions();
        if self.prune {
            self.reach.reset(state);
        }
        if legal.is_empty() || (self.prune && !self.reach.viable(state)) {
            return outcome(Status::Failure, state.total_wire_length(), Vec::new(), 0, false);
        }
        let base = eval.as_deref().map_or(0, PolicyEvaluator::depth);
        let probs = match eval.as_deref() {
            Some(ev) if legal.len() > 1 => ev.probabilities(),
            _ => fallback(state, legal),
        };
        let (order, len) = ranked(probs, legal);
        self.stack.push(Frame {
            reach: ReachUndo(0),
            effect: None,
            order,
            len: len as u8,
            next: 0,
            synced: true,
            ev_depth: base,
        });

        let mut expansions = 0usize;
        let mut first_dead_end: Option<(Vec<Action>, usize)> = None;
        let (status, budget_exhausted) = loop {
            let top = self.stack.last_mut().expect("root frame stays until the end");
            if top.next < top.len {
                let a = top.order[top.next as usize];
                top.next += 1;
                let parent_depth = top.ev_depth;
                if expansions == budget {
                    break (Status::Failure, true);
                }
                let fx = state.apply_in_place(a).expect("ranked moves are legal");
                let fp = state.fingerprint();
                if self.exhausted.contains(&fp) {
                    state.undo(&fx);
                    continue;
                }
                let reach = if self.prune { self.reach.enter(state, fx.to) } else { ReachUndo(0) };
                expansions += 1;
                if let Some(t) = self.trace.as_mut() {
                    t.push(fp);
                }
                if state.current_net().is_none() {
                    self.stack.push(Frame {
                        reach,
                        effect: Some(fx),
                        order: [Action::Up; ACTIONS],
                        len: 0,
                        next: 0,
                        synced: false,
                        ev_depth: parent_depth,
                    });
                    break (Status::Success, false);
                }
                let legal = state.legal_actions();
                if legal.is_empty() || (self.prune && !self.reach.viable(state)) {
                    if first_dead_end.is_none() && legal.is_empty() {
                        let mut trail = self.trail();
                        trail.push(a);
                        first_dead_end = Some((trail, state.total_wire_length()));
                    }
                    self.exhausted.insert(fp);
                    self.reach.leave(reach);
                    state.undo(&fx);
                    continue;
                }
                let mut frame = Frame {
                    reach,
                    effect: Some(fx),
                    order: [Action::Up; ACTIONS],
                    len: 1,
                    next: 0,
                    synced: false,
                    ev_depth: parent_depth,
                };
                match eval.as_deref_mut() {
                    Some(ev) if legal.len() > 1 => {
                        self.cells.clear();
                        self.cells.extend(fx.changed_cells());
                        for f in self.stack.iter().rev() {
                            if f.synced {
                                break;
                            }
                            self.cells.extend(f.effect.expect("only the root lacks a move").changed_cells());
                        }
                        ev.push(state, self.cells.iter().copied());
                        frame.synced = true;
                        frame.ev_depth = ev.depth();
                        let (order, len) = ranked(ev.probabilities(), legal);
                        frame.order = order;
                        frame.len = len as u8;
                    }
                    _ => {
                        let (order, len) = ranked(fallback(state, legal), legal);
                        frame.order = order;
                        frame.len = len as u8;
                    }
                }
                self.stack.push(frame);
            } else {
                self.exhausted.insert(state.fingerprint());
                let frame = self.stack.pop().expect("non-empty");
                let Some(fx) = frame.effect else {
                    self.stack.push(frame);
                    break (Status::Failure, false);
                };
                self.reach.leave(frame.reach);
                state.undo(&fx);
                if let (Some(ev), Some(parent)) = (eval.as_deref_mut(), self.stack.last()) {
                    ev.truncate(parent.ev_depth);
                }
            }
        };

        let (trail, length) = if status == Status::Success {
            (self.trail(), state.total_wire_length())
        } else {
            first_dead_end.unwrap_or_else(|| (self.trail(), state.total_wire_length()))
        };
        while let Some(frame) = self.stack.pop() {
            self.reach.leave(frame.reach);
            if let Some(fx) = frame.effect {
                state.undo(&fx);
            }
        }
        if let Some(ev) = eval {
            ev.truncate(base);
        }
        outcome(status, length, trail, expansions, budget_exhausted)
    }

    fn trail(&self) -> Vec<Action> {
        self.stack
            .iter()
            .filter_map(|f| f.effect.map(|fx| fx.from.direction_to(fx.to).expect("one step")))
            .collect()
    }
}

fn outcome(status: Status, length: usize, trail: Vec<Action>, expansions: usize, budget_exhausted: bool) -> RolloutOutcome {
    RolloutOutcome {
        status,
        length,
        trail,
        expansions,
        budget_exhausted,
    }
}

/// Policy-guided depth-first rollout from `state` with the given node budget
/// (see [`default_dfs_budget`]).
pub fn dfs_rollout(state: &RoutingState, guide: Guide<'_>, budget: usize) -> Result<RolloutOutcome, PolicyError> {
    let mut s = state.clone();
    let mut dfs = Dfs::new();
    Ok(match guide {
        Guide::Uniform => dfs.run(&mut s, None, false, budget),
        Guide::Distance => dfs.run(&mut s, None, true, budget),
        Guide::Policy(net) => {
            let mut ev = PolicyEvaluator::new(net, &s)?;
            dfs.run(&mut s, Some(&mut ev), false, budget)
        }
    })
}

/// As [`dfs_rollout`] with a uniform guide, also returning the fingerprint of
/// every state entered in order.
pub fn dfs_rollout_traced(state: &RoutingState, budget: usize) -> (RolloutOutcome, Vec<u64>) {
    let mut s = state.clone();
    let mut dfs = Dfs::new();
    dfs.trace = Some(Vec::new());
    let out = dfs.run(&mut s, None, false, budget);
    (out, dfs.trace.take().unwrap_or_default())
}

#[cfg(test)]
mod tests {
    use std::collections::HashMap;
    use std::sync::Arc;

    use rand::seq::SliceRandom;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::baselines::exhaustive_optimal;
    use crate::grid::{Net, RoutingProblem};
    use crate::policy::{PolicyParams, PolicyShape};

    fn random_problem(rng: &mut ChaCha8Rng, w: usize, h: usize, nets: usize, obstacles: usize) -> RoutingProblem {
        let mut cells: Vec<Point> = (0..h).flat_map(|y| (0..w).map(move |x| Point::new(x, y))).collect();
        cells.shuffle(rng);
        let list = (0..nets).map(|i| Net::new(i + 1, cells[2 * i], cells[2 * i + 1])).collect();
        RoutingProblem::new(w, h, cells[2 * nets..2 * nets + obstacles].iter().copied(), list).unwrap()
    }

    fn same_partition(a: &[u32], b: &[u32]) -> bool {
        let mut fwd = HashMap::new();
        let mut back = HashMap::new();
        a.iter().zip(b).all(|(&x, &y)| {
            (x == 0) == (y == 0) && *fwd.entry(x).or_insert(y) == y && *back.entry(y).or_insert(x) == x
        })
    }

    #[test]
    fn normalize_rescales_over_legal_moves() {
        let mut legal = ActionSet::EMPTY;
        legal.insert(Action::Up);
        legal.insert(Action::Right);
        let n = normalize_policy([0.1, 0.2, 0.3, 0.4], legal).unwrap();
        assert_eq!(n.len(), 2);
        assert_eq!(n[0].0, Action::Up);
        assert!((n[0].1 - 0.2).abs() < 1e-12 && (n[1].1 - 0.8).abs() < 1e-12);
        let u = normalize_policy([0.0, 1.0, 1.0, 0.0], legal).unwrap();
        assert!(u.iter().all(|&(_, p)| p == 0.5));
        assert_eq!(normalize_policy([0.25; 4], ActionSet::EMPTY), Err(PolicyError::NoLegalActions));
    }

    #[test]
    fn ranking_breaks_ties_canonically() {
        let mut legal = ActionSet::EMPTY;
        Action::ALL.into_iter().for_each(|a| legal.insert(a));
        let (order, len) = ranked([0.2, 0.4, 0.2, 0.2], legal);
        assert_eq!(len, 4);
        assert_eq!(order, [Action::Down, Action::Up, Action::Left, Action::Right]);
    }

    #[test]
    fn incremental_components_match_full_relabel() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for round in 0..40 {
            let (w, h) = (7 + round % 5, 6 + round % 4);
            let p = Arc::new(random_problem(&mut rng, w, h, 3, (w * h) / 8));
            let mut state = RoutingState::initial(p);
            let mut reach = Reach::default();
            reach.reset(&state);
            let mut full = Reach::default();
            let mut undo: Vec<(MoveEffect, ReachUndo)> = Vec::new();
            for _ in 0..120 {
                let legal = state.legal_actions();
                let back = undo.len() > 0 && (legal.is_empty() || state.current_net().is_none() || rng.gen_bool(0.3));
                if back {
                    let (fx, u) = undo.pop().unwrap();
                    reach.leave(u);
                    state.undo(&fx);
                } else if !legal.is_empty() && state.current_net().is_some() {
                    let a = legal.nth(rng.gen_range(0..legal.len())).unwrap();
                    let fx = state.apply_in_place(a).unwrap();
                    let u = reach.enter(&state, fx.to);
                    undo.push((fx, u));
                } else {
                    break;
                }
                full.relabel(&state);
                assert!(same_partition(&reach.label, &full.label), "round {round}");
            }
        }
    }

    #[test]
    fn no_state_is_entered_twice() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let p = Arc::new(random_problem(&mut rng, 5, 5, 3, 3));
            let (out, trace) = dfs_rollout_traced(&RoutingState::initial(p), 100_000);
            let mut seen = FxHashSet::default();
            assert!(trace.iter().all(|f| seen.insert(*f)));
            assert_eq!(trace.len(), out.expansions);
        }
    }

    #[test]
    fn complete_search_agrees_with_exhaustive_router() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut solvable = 0;
        for round in 0..60 {
            let nets = 1 + round % 3;
            let p = random_problem(&mut rng, 6, 6, nets, 4);
            let exists = exhaustive_optimal(&p).unwrap().is_some();
            let start = RoutingState::initial(Arc::new(p));
            for prune in [true, false] {
                let mut s = start.clone();
                let mut dfs = Dfs::new();
                dfs.prune = prune;
                let out = dfs.run(&mut s, None, false, usize::MAX);
                assert_eq!(s, start);
                assert!(!out.budget_exhausted);
                assert_eq!(out.status == Status::Success, exists, "round {round}, prune {prune}");
                let end = out.replay(&start);
                assert_eq!(end.total_wire_length(), out.length);
                if exists {
                    assert_eq!(end.status(), Status::Success);
                }
            }
            solvable += usize::from(exists);
        }
        assert!(solvable > 10 && solvable < 60);
    }

    #[test]
    fn budget_caps_expansions() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let p = Arc::new(random_problem(&mut rng, 8, 8, 3, 6));
        let out = dfs_rollout(&RoutingState::initial(p), Guide::Uniform, 5).unwrap();
        assert!(out.expansions <= 5);
        if out.status == Status::Failure && out.expansions == 5 {
            assert!(out.budget_exhausted);
        }
    }

    #[test]
    fn policy_guide_restores_and_repeats() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let p = Arc::new(random_problem(&mut rng, 9, 9, 3, 5));
        let net = CompiledPolicy::new(&PolicyParams::init(PolicyShape::standard(9, 9), &mut rng));
        let start = RoutingState::initial(p);
        let a = dfs_rollout(&start, Guide::Policy(&net), 2000).unwrap();
        let b = dfs_rollout(&start, Guide::Policy(&net), 2000).unwrap();
        assert_eq!(a, b);
        let mut s = start.clone();
        let mut ev = PolicyEvaluator::new(&net, &s).unwrap();
        let before = ev.probabilities();
        let c = Dfs::new().run(&mut s, Some(&mut ev), false, 2000);
        assert_eq!(c, a);
        assert_eq!(s, start);
        assert_eq!(ev.depth(), 0);
        assert_eq!(ev.probabilities(), before);
    }

    #[test]
    fn random_playout_ends_terminal_and_restores() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let p = Arc::new(random_problem(&mut rng, 8, 8, 3, 4));
        let mut s = RoutingState::initial(p);
        let start = s.clone();
        let out = random_playout(&mut s, &mut rng);
        assert_eq!(s, start);
        let end = out.replay(&start);
        assert_ne!(end.status(), Status::Ongoing);
        assert_eq!(end.status(), out.status);
    }
}
