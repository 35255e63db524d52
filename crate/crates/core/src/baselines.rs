//! Sequential maze routers (Lee wavefront and A*), the per-net shortest-length
//! reference used by the redundancy metric, and an exhaustive optimal router
//! for small boards.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, VecDeque};
use std::time::Instant;

use itertools::Itertools;
use thiserror::Error;

use crate::grid::{Action, Net, Path, Point, RoutingProblem};
use crate::mcts::RouteResult;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum BaselineError {
    #[error("net {0} cannot reach its second pin even on an otherwise empty board")]
    Unreachable(usize),
    #[error("exhaustive search supports area <= {max_area} and at most {max_nets} nets, got area {area} with {nets} nets")]
    TooLarge {
        area: usize,
        nets: usize,
        max_area: usize,
        max_nets: usize,
    },
    #[error("ordering search supports at most {max} nets, got {nets}")]
    TooManyNets { nets: usize, max: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Algorithm {
    AStar,
    Lee,
}

impl Algorithm {
    pub fn name(self) -> &'static str {
        match self {
            Algorithm::AStar => "astar",
            Algorithm::Lee => "lee",
        }
    }
}

pub const EXHAUSTIVE_MAX_AREA: usize = 36;
pub const EXHAUSTIVE_MAX_NETS: usize = 3;
pub const ORDERING_MAX_NETS: usize = 6;

/// Whether `net` may pass through cell `i`.
#[inline]
fn passable(problem: &RoutingProblem, blocked: &[bool], net: &Net, i: usize) -> bool {
    if blocked[i] || problem.obstacle_mask()[i] {
        return false;
    }
    let owner = problem.pin_owner_at(i);
    owner == 0 || owner == net.id
}

/// Obstacle-only blocked mask, the starting point for sequential routing.
pub fn empty_blocked(problem: &RoutingProblem) -> Vec<bool> {
    vec![false; problem.area()]
}

/// Blocked mask from a set of points.
pub fn blocked_from_points(problem: &RoutingProblem, points: impl IntoIterator<Item = Point>) -> Vec<bool> {
    let mut mask = empty_blocked(problem);
    for p in points {
        mask[problem.index(p)] = true;
    }
    mask
}

/// Search effort of a single-net route.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct SearchStats {
    /// Vertices removed from the frontier.
    pub expanded: usize,
}

/// Breadth-first wavefront distances (in edges) from `from` for `net`.
fn wavefront(problem: &RoutingProblem, blocked: &[bool], net: &Net, from: Point, stop: Option<Point>) -> (Vec<u32>, usize) {
    let mut dist = vec![u32::MAX; problem.area()];
    let start = problem.index(from);
    if !passable(problem, blocked, net, start) {
        return (dist, 0);
    }
    let stop = stop.map(|p| problem.index(p));
    let mut queue = VecDeque::from([start]);
    dist[start] = 0;
    let mut expanded = 0;
    while let Some(i) = queue.pop_front() {
        expanded += 1;
        if Some(i) == stop {
            break;
        }
        let p = problem.point(i);
        for a in Action::ALL {
            if let Some(q) = p.step(a, problem.width(), problem.height()) {
                let j = problem.index(q);
                if dist[j] == u32::MAX && passable(problem, blocked, net, j) {
                    dist[j] = dist[i] + 1;
                    queue.push_back(j);
                }
            }
        }
    }
    (dist, expanded)
}

/// Lee's algorithm: shortest path from `pin_a` to `pin_b` avoiding `blocked`,
/// obstacles, and foreign pins. Backtrace prefers directions in canonical order.
pub fn lee_route_net(problem: &RoutingProblem, blocked: &[bool], net: &Net) -> Option<Path> {
    lee_route_net_with_stats(problem, blocked, net).0
}

pub fn lee_route_net_with_stats(problem: &RoutingProblem, blocked: &[bool], net: &Net) -> (Option<Path>, SearchStats) {
    let (dist, expanded) = wavefront(problem, blocked, net, net.pin_a, Some(net.pin_b));
    let stats = SearchStats { expanded };
    let goal = problem.index(net.pin_b);
    if dist[goal] == u32::MAX {
        return (None, stats);
    }
    let mut cur = net.pin_b;
    let mut rev = vec![cur];
    while cur != net.pin_a {
        let d = dist[problem.index(cur)];
        cur = Action::ALL
            .iter()
            .filter_map(|&a| cur.step(a, problem.width(), problem.height()))
            .find(|q| dist[problem.index(*q)] == d - 1)
            .expect("wavefront predecessor");
        rev.push(cur);
    }
    rev.reverse();
    (Some(Path::from_vec_unchecked(rev)), stats)
}

/// A* with the Manhattan heuristic. Frontier order: lowest `f`, then lowest
/// `h`, then insertion order (neighbors are pushed in canonical order).
pub fn astar_route_net(problem: &RoutingProblem, blocked: &[bool], net: &Net) -> Option<Path> {
    astar_route_net_with_stats(problem, blocked, net).0
}

pub fn astar_route_net_with_stats(problem: &RoutingProblem, blocked: &[bool], net: &Net) -> (Option<Path>, SearchStats) {
    let mut stats = SearchStats::default();
    let start = problem.index(net.pin_a);
    let goal = problem.index(net.pin_b);
    if !passable(problem, blocked, net, start) || !passable(problem, blocked, net, goal) {
        return (None, stats);
    }
    let h = |p: Point| p.manhattan(net.pin_b);
    let mut g = vec![usize::MAX; problem.area()];
    let mut parent = vec![usize::MAX; problem.area()];
    let mut closed = vec![false; problem.area()];
    let mut heap = BinaryHeap::new();
    let mut seq = 0usize;
    g[start] = 0;
    heap.push(Reverse((h(net.pin_a), h(net.pin_a), seq, start)));
    while let Some(Reverse((_, _, _, i))) = heap.pop() {
        if closed[i] {
            continue;
        }
        closed[i] = true;
        stats.expanded += 1;
        if i == goal {
            let mut rev = vec![problem.point(i)];
            let mut cur = i;
            while cur != start {
                cur = parent[cur];
                rev.push(problem.point(cur));
            }
            rev.reverse();
            return (Some(Path::from_vec_unchecked(rev)), stats);
        }
        let p = problem.point(i);
        for a in Action::ALL {
            if let Some(q) = p.step(a, problem.width(), problem.height()) {
                let j = problem.index(q);
                if closed[j] || !passable(problem, blocked, net, j) {
                    continue;
                }
                let ng = g[i] + 1;
                if ng < g[j] {
                    g[j] = ng;
                    parent[j] = i;
                    seq += 1;
                    heap.push(Reverse((ng + h(q), h(q), seq, j)));
                }
            }
        }
    }
    (None, stats)
}

fn route_net(alg: Algorithm, problem: &RoutingProblem, blocked: &[bool], net: &Net) -> Option<Path> {
    match alg {
        Algorithm::AStar => astar_route_net(problem, blocked, net),
        Algorithm::Lee => lee_route_net(problem, blocked, net),
    }
}

/// Routes nets greedily in list order; each path blocks later nets.
pub fn sequential_route(problem: &RoutingProblem, alg: Algorithm) -> RouteResult {
    let t0 = Instant::now();
    let mut blocked = empty_blocked(problem);
    let mut paths = Vec::with_capacity(problem.net_count());
    let mut success = true;
    for net in problem.nets() {
        match route_net(alg, problem, &blocked, net) {
            Some(path) => {
                for &v in path.vertices() {
                    blocked[problem.index(v)] = true;
                }
                paths.push(path);
            }
            None => {
                success = false;
                break;
            }
        }
    }
    let total_length = paths.iter().map(Path::len).sum();
    RouteResult {
        success,
        paths,
        total_length,
        iterations_used: 0,
        search_calls: 0,
        budget_exhausted_rollouts: 0,
        wall_time: t0.elapsed(),
    }
}

/// Tries every net ordering (up to [`ORDERING_MAX_NETS`] nets) and returns the
/// first successful one in lexicographic order, with paths in original net order.
pub fn best_order_route(problem: &RoutingProblem, alg: Algorithm) -> Result<Option<(Vec<usize>, RouteResult)>, BaselineError> {
    let k = problem.net_count();
    if k > ORDERING_MAX_NETS {
        return Err(BaselineError::TooManyNets {
            nets: k,
            max: ORDERING_MAX_NETS,
        });
    }
    for order in (0..k).permutations(k) {
        let reordered = problem.reordered(&order).expect("valid permutation");
        let mut result = sequential_route(&reordered, alg);
        if result.success {
            let mut paths = vec![Path::default(); k];
            for (pos, &orig) in order.iter().enumerate() {
                paths[orig] = result.paths[pos].clone();
            }
            result.paths = paths;
            return Ok(Some((order, result)));
        }
    }
    Ok(None)
}

/// Shortest vertex count of each net routed alone against obstacles and
/// foreign pins.
pub fn per_net_shortest(problem: &RoutingProblem) -> Result<Vec<usize>, BaselineError> {
    let blocked = empty_blocked(problem);
    problem
        .nets()
        .iter()
        .map(|net| {
            let (dist, _) = wavefront(problem, &blocked, net, net.pin_a, Some(net.pin_b));
            match dist[problem.index(net.pin_b)] {
                u32::MAX => Err(BaselineError::Unreachable(net.id)),
                d => Ok(d as usize + 1),
            }
        })
        .collect()
}

/// `L_s`: sum of the per-net shortest vertex counts. No non-intersecting
/// routing can be shorter.
pub fn shortest_length_lower_bound(problem: &RoutingProblem) -> Result<usize, BaselineError> {
    Ok(per_net_shortest(problem)?.iter().sum())
}

struct Exhaustive<'a> {
    problem: &'a RoutingProblem,
    blocked: Vec<bool>,
    paths: Vec<Vec<Point>>,
    best_len: usize,
    best: Option<Vec<Vec<Point>>>,
}

impl Exhaustive<'_> {
    fn distance(&self, net: &Net, from: Point, to: Point) -> Option<usize> {
        // The head itself is already blocked; measure from its neighbors.
        let p = self.problem;
        let (dist, _) = wavefront(p, &self.blocked, net, to, None);
        if from == to {
            return Some(0);
        }
        Action::ALL
            .iter()
            .filter_map(|&a| from.step(a, p.width(), p.height()))
            .filter_map(|q| match dist[p.index(q)] {
                u32::MAX => None,
                d => Some(d as usize + 1),
            })
            .min()
    }

    fn later_bound(&self, from_net: usize) -> Option<usize> {
        let p = self.problem;
        let mut total = 0;
        for net in &p.nets()[from_net..] {
            let (dist, _) = wavefront(p, &self.blocked, net, net.pin_a, Some(net.pin_b));
            match dist[p.index(net.pin_b)] {
                u32::MAX => return None,
                d => total += d as usize + 1,
            }
        }
        Some(total)
    }

    fn used(&self) -> usize {
        self.paths.iter().map(Vec::len).sum()
    }

    fn start_net(&mut self, n: usize) {
        let p = self.problem;
        if n == p.net_count() {
            let len = self.used();
            if len < self.best_len {
                self.best_len = len;
                self.best = Some(self.paths.clone());
            }
            return;
        }
        let net = p.nets()[n];
        let Some(bound) = self.later_bound(n) else { return };
        if self.used() + bound >= self.best_len {
            return;
        }
        self.blocked[p.index(net.pin_a)] = true;
        self.paths.push(vec![net.pin_a]);
        self.extend(n, net.pin_a);
        self.paths.pop();
        self.blocked[p.index(net.pin_a)] = false;
    }

    fn extend(&mut self, n: usize, head: Point) {
        let p = self.problem;
        let net = p.nets()[n];
        let Some(d) = self.distance(&net, head, net.pin_b) else { return };
        let Some(later) = self.later_bound(n + 1) else { return };
        if self.used() + d + later >= self.best_len {
            return;
        }
        for a in Action::ALL {
            let Some(q) = head.step(a, p.width(), p.height()) else { continue };
            let i = p.index(q);
            if !passable(p, &self.blocked, &net, i) {
                continue;
            }
            self.blocked[i] = true;
            self.paths.last_mut().expect("open path").push(q);
            if q == net.pin_b {
                self.start_net(n + 1);
            } else {
                self.extend(n, q);
            }
            self.paths.last_mut().expect("open path").pop();
            self.blocked[i] = false;
        }
    }
}

/// Minimum-total-length non-intersecting routing by branch and bound.
/// Returns `Ok(None)` when the problem is unsolvable.
pub fn exhaustive_optimal(problem: &RoutingProblem) -> Result<Option<RouteResult>, BaselineError> {
    if problem.area() > EXHAUSTIVE_MAX_AREA || problem.net_count() > EXHAUSTIVE_MAX_NETS {
        return Err(BaselineError::TooLarge {
            area: problem.area(),
            nets: problem.net_count(),
            max_area: EXHAUSTIVE_MAX_AREA,
            max_nets: EXHAUSTIVE_MAX_NETS,
        });
    }
    let t0 = Instant::now();
    let mut search = Exhaustive {
        problem,
        blocked: empty_blocked(problem),
        paths: Vec::new(),
        best_len: usize::MAX,
        best: None,
    };
    search.start_net(0);
    Ok(search.best.map(|paths| {
        let paths: Vec<Path> = paths.into_iter().map(Path::from_vec_unchecked).collect();
        RouteResult {
            success: true,
            total_length: paths.iter().map(Path::len).sum(),
            paths,
            iterations_used: 0,
            search_calls: 0,
            budget_exhausted_rollouts: 0,
            wall_time: t0.elapsed(),
        }
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::validate_routing;

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

    #[test]
    fn straight_line_on_open_grid() {
        let p = problem(6, 6, &[], &[(0, 0, 3, 0)]);
        let b = empty_blocked(&p);
        let lee = lee_route_net(&p, &b, &p.nets()[0]).unwrap();
        let astar = astar_route_net(&p, &b, &p.nets()[0]).unwrap();
        assert_eq!(lee.len(), 4);
        assert_eq!(astar.len(), 4);
        assert_eq!(lee.vertices(), astar.vertices());
    }

    #[test]
    fn walled_pin_is_unroutable() {
        let p = problem(5, 5, &[(3, 2), (1, 2), (2, 3), (2, 1)], &[(0, 0, 2, 2)]);
        let b = empty_blocked(&p);
        assert!(lee_route_net(&p, &b, &p.nets()[0]).is_none());
        assert!(astar_route_net(&p, &b, &p.nets()[0]).is_none());
        assert_eq!(shortest_length_lower_bound(&p), Err(BaselineError::Unreachable(1)));
        assert!(exhaustive_optimal(&p).unwrap().is_none());
    }

    #[test]
    fn foreign_pins_are_avoided() {
        let p = problem(4, 2, &[], &[(0, 0, 3, 0), (1, 0, 1, 1)]);
        let b = empty_blocked(&p);
        // Net 2 occupies the whole column x = 1, so net 1 is cut off.
        assert!(lee_route_net(&p, &b, &p.nets()[0]).is_none());
    }

    #[test]
    fn parallel_nets_route_at_shortest_length() {
        let p = problem(6, 3, &[], &[(0, 0, 3, 0), (0, 2, 5, 2)]);
        for alg in [Algorithm::AStar, Algorithm::Lee] {
            let r = sequential_route(&p, alg);
            assert!(r.success);
            assert_eq!(r.total_length, 10);
            validate_routing(&p, &r.paths).unwrap();
        }
        assert_eq!(shortest_length_lower_bound(&p).unwrap(), 10);
    }

    #[test]
    fn heuristic_vanishes_at_goal() {
        let p = Point::new(4, 7);
        assert_eq!(p.manhattan(p), 0);
    }

    #[test]
    fn astar_expands_no_more_than_lee_on_open_grid() {
        let p = problem(20, 20, &[], &[(2, 3, 17, 15)]);
        let b = empty_blocked(&p);
        let (_, lee) = lee_route_net_with_stats(&p, &b, &p.nets()[0]);
        let (_, astar) = astar_route_net_with_stats(&p, &b, &p.nets()[0]);
        assert!(astar.expanded <= lee.expanded, "{astar:?} vs {lee:?}");
    }

    #[test]
    fn exhaustive_corner_to_corner() {
        let p = problem(3, 3, &[], &[(0, 0, 2, 2)]);
        let r = exhaustive_optimal(&p).unwrap().unwrap();
        assert_eq!(r.total_length, 5);
    }

    #[test]
    fn exhaustive_refuses_large_inputs() {
        let p = problem(7, 6, &[], &[(0, 0, 2, 2)]);
        assert!(matches!(exhaustive_optimal(&p), Err(BaselineError::TooLarge { .. })));
    }

    #[test]
    fn best_order_finds_working_permutation() {
        // Net 1 runs straight up x=1 and cuts net 2 off from x=0; routing
        // net 2 first lets net 1 detour through the x=3 column.
        let p = problem(4, 3, &[], &[(1, 0, 1, 2), (0, 1, 2, 1)]);
        assert!(!sequential_route(&p, Algorithm::Lee).success);
        let (order, r) = best_order_route(&p, Algorithm::Lee).unwrap().unwrap();
        assert_eq!(order, vec![1, 0]);
        validate_routing(&p, &r.paths).unwrap();

        let sealed = problem(3, 3, &[(1, 0)], &[(0, 1, 2, 1), (0, 0, 2, 0)]);
        assert!(best_order_route(&sealed, Algorithm::Lee).unwrap().is_none());
        assert!(exhaustive_optimal(&sealed).unwrap().is_none());
    }
}
