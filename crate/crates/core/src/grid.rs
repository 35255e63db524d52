//! Routing domain: the grid graph, obstacles, two-pin nets, paths, and the
//! sequential routing state with its integer state-matrix projection.
//!
//! Coordinates are `x` to the right and `y` up. Matrix row `i` is `y` and
//! column `j` is `x`. Cells are vertices and edges join 4-neighbors.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use thiserror::Error;

use crate::rng::splitmix64;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GridError {
    #[error("point ({x}, {y}) is outside the {width}x{height} grid")]
    OutOfBounds {
        x: usize,
        y: usize,
        width: usize,
        height: usize,
    },
    #[error("invalid routing problem: {0}")]
    InvalidProblem(String),
    #[error("action {action} is illegal from head ({}, {})", head.x, head.y)]
    IllegalAction { action: Action, head: Point },
    #[error("routing is already complete")]
    Finished,
    #[error("invalid path: {0}")]
    InvalidPath(String),
    #[error("invalid routing: {0}")]
    InvalidRouting(String),
    #[error("invalid state: {0}")]
    InvalidState(String),
}

/// A grid vertex.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Point {
    pub x: usize,
    pub y: usize,
}

impl Point {
    pub const fn new(x: usize, y: usize) -> Self {
        Point { x, y }
    }

    pub fn manhattan(self, other: Point) -> usize {
        self.x.abs_diff(other.x) + self.y.abs_diff(other.y)
    }

    /// The neighbor in direction `a`, if it stays inside a `width x height` grid.
    pub fn step(self, a: Action, width: usize, height: usize) -> Option<Point> {
        let p = match a {
            Action::Up => Point::new(self.x, self.y.checked_add(1)?),
            Action::Down => Point::new(self.x, self.y.checked_sub(1)?),
            Action::Left => Point::new(self.x.checked_sub(1)?, self.y),
            Action::Right => Point::new(self.x.checked_add(1)?, self.y),
        };
        (p.x < width && p.y < height).then_some(p)
    }

    /// The action leading from `self` to an adjacent `to`.
    pub fn direction_to(self, to: Point) -> Option<Action> {
        match (to.x as isize - self.x as isize, to.y as isize - self.y as isize) {
            (0, 1) => Some(Action::Up),
            (0, -1) => Some(Action::Down),
            (-1, 0) => Some(Action::Left),
            (1, 0) => Some(Action::Right),
            _ => None,
        }
    }
}

impl fmt::Display for Point {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.x, self.y)
    }
}

/// One of the four moves of the path head. The declaration order is the
/// canonical order used for every tie-break.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Action {
    Up,
    Down,
    Left,
    Right,
}

impl Action {
    pub const ALL: [Action; 4] = [Action::Up, Action::Down, Action::Left, Action::Right];

    pub const fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Action> {
        Action::ALL.get(i).copied()
    }

    pub const fn name(self) -> &'static str {
        match self {
            Action::Up => "up",
            Action::Down => "down",
            Action::Left => "left",
            Action::Right => "right",
        }
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Action {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "up" => Ok(Action::Up),
            "down" => Ok(Action::Down),
            "left" => Ok(Action::Left),
            "right" => Ok(Action::Right),
            _ => Err(format!("unknown direction `{s}`")),
        }
    }
}

/// A subset of the four actions, iterated in canonical order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Hash)]
pub struct ActionSet(u8);

impl ActionSet {
    pub const EMPTY: ActionSet = ActionSet(0);

    pub fn insert(&mut self, a: Action) {
        self.0 |= 1 << a.index();
    }

    pub fn remove(&mut self, a: Action) {
        self.0 &= !(1 << a.index());
    }

    pub fn contains(self, a: Action) -> bool {
        self.0 & (1 << a.index()) != 0
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    /// The `n`-th member in canonical order.
    pub fn nth(self, n: usize) -> Option<Action> {
        self.iter().nth(n)
    }

    pub fn iter(self) -> impl Iterator<Item = Action> {
        Action::ALL.into_iter().filter(move |a| self.contains(*a))
    }

    pub fn to_vec(self) -> Vec<Action> {
        self.iter().collect()
    }
}

impl FromIterator<Action> for ActionSet {
    fn from_iter<I: IntoIterator<Item = Action>>(iter: I) -> Self {
        let mut set = ActionSet::EMPTY;
        for a in iter {
            set.insert(a);
        }
        set
    }
}

/// A two-pin net. `id` is 1-based and equals the position in the net list.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Net {
    pub id: usize,
    pub pin_a: Point,
    pub pin_b: Point,
}

impl Net {
    pub fn new(id: usize, pin_a: Point, pin_b: Point) -> Self {
        Net { id, pin_a, pin_b }
    }

    pub fn pin(&self, side: PinSide) -> Point {
        match side {
            PinSide::A => self.pin_a,
            PinSide::B => self.pin_b,
        }
    }
}

/// Which pin of a net its path starts from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum PinSide {
    #[default]
    A,
    B,
}

impl PinSide {
    pub fn other(self) -> PinSide {
        match self {
            PinSide::A => PinSide::B,
            PinSide::B => PinSide::A,
        }
    }
}

/// Grid dimensions, obstacle set, and ordered net list.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RoutingProblem {
    width: usize,
    height: usize,
    /// Sorted by `(y, x)`.
    obstacles: Vec<Point>,
    nets: Vec<Net>,
    obstacle_mask: Vec<bool>,
    /// Net id owning each cell's pin, 0 when the cell is not a pin.
    pin_owner: Vec<usize>,
}

impl RoutingProblem {
    /// Builds and validates a problem. Net ids must run `1..=k` in order.
    pub fn new(
        width: usize,
        height: usize,
        obstacles: impl IntoIterator<Item = Point>,
        nets: Vec<Net>,
    ) -> Result<Self, GridError> {
        if width == 0 || height == 0 {
            return Err(GridError::InvalidProblem(format!(
                "grid dimensions must be positive, got {width}x{height}"
            )));
        }
        if nets.is_empty() {
            return Err(GridError::InvalidProblem("at least one net is required".into()));
        }
        let check = |p: Point| -> Result<(), GridError> {
            if p.x < width && p.y < height {
                Ok(())
            } else {
                Err(GridError::OutOfBounds {
                    x: p.x,
                    y: p.y,
                    width,
                    height,
                })
            }
        };
        let mut obstacle_mask = vec![false; width * height];
        let mut obs = Vec::new();
        for p in obstacles {
            check(p)?;
            let i = p.y * width + p.x;
            if !obstacle_mask[i] {
                obstacle_mask[i] = true;
                obs.push(p);
            }
        }
        obs.sort_by_key(|p| (p.y, p.x));
        let mut pin_owner = vec![0usize; width * height];
        for (i, net) in nets.iter().enumerate() {
            if net.id != i + 1 {
                return Err(GridError::InvalidProblem(format!(
                    "net at position {} has id {}, expected {}",
                    i + 1,
                    net.id,
                    i + 1
                )));
            }
            if net.pin_a == net.pin_b {
                return Err(GridError::InvalidProblem(format!(
                    "net {} has identical pins {}",
                    net.id, net.pin_a
                )));
            }
            for pin in [net.pin_a, net.pin_b] {
                check(pin)?;
                let c = pin.y * width + pin.x;
                if obstacle_mask[c] {
                    return Err(GridError::InvalidProblem(format!(
                        "pin {} of net {} is an obstacle",
                        pin, net.id
                    )));
                }
                if pin_owner[c] != 0 {
                    return Err(GridError::InvalidProblem(format!(
                        "pin {} is shared by nets {} and {}",
                        pin, pin_owner[c], net.id
                    )));
                }
                pin_owner[c] = net.id;
            }
        }
        Ok(RoutingProblem {
            width,
            height,
            obstacles: obs,
            nets,
            obstacle_mask,
            pin_owner,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    /// Number of vertices `|V|`.
    pub fn area(&self) -> usize {
        self.width * self.height
    }

    pub fn obstacles(&self) -> &[Point] {
        &self.obstacles
    }

    pub fn nets(&self) -> &[Net] {
        &self.nets
    }

    pub fn net_count(&self) -> usize {
        self.nets.len()
    }

    pub fn contains(&self, p: Point) -> bool {
        p.x < self.width && p.y < self.height
    }

    pub fn index(&self, p: Point) -> usize {
        p.y * self.width + p.x
    }

    pub fn point(&self, index: usize) -> Point {
        Point::new(index % self.width, index / self.width)
    }

    pub fn is_obstacle(&self, p: Point) -> bool {
        self.obstacle_mask[self.index(p)]
    }

    pub(crate) fn obstacle_mask(&self) -> &[bool] {
        &self.obstacle_mask
    }

    /// Id of the net owning the pin at `p`, if any.
    pub fn pin_owner(&self, p: Point) -> Option<usize> {
        match self.pin_owner[self.index(p)] {
            0 => None,
            n => Some(n),
        }
    }

    pub(crate) fn pin_owner_at(&self, index: usize) -> usize {
        self.pin_owner[index]
    }

    /// Copy of this problem with the nets permuted; `order[i]` is the 0-based
    /// index of the net placed at position `i`. Ids are renumbered.
    pub fn reordered(&self, order: &[usize]) -> Result<RoutingProblem, GridError> {
        let mut seen = vec![false; self.nets.len()];
        if order.len() != self.nets.len() || order.iter().any(|&i| i >= seen.len() || std::mem::replace(&mut seen[i], true)) {
            return Err(GridError::InvalidProblem("net order is not a permutation".into()));
        }
        let nets = order
            .iter()
            .enumerate()
            .map(|(pos, &i)| Net::new(pos + 1, self.nets[i].pin_a, self.nets[i].pin_b))
            .collect();
        RoutingProblem::new(self.width, self.height, self.obstacles.iter().copied(), nets)
    }
}

/// In-bounds orthogonal neighbors of `p` in canonical action order.
pub fn neighbors(p: Point, problem: &RoutingProblem) -> Result<Vec<Point>, GridError> {
    if !problem.contains(p) {
        return Err(GridError::OutOfBounds {
            x: p.x,
            y: p.y,
            width: problem.width,
            height: problem.height,
        });
    }
    Ok(Action::ALL
        .iter()
        .filter_map(|&a| p.step(a, problem.width, problem.height))
        .collect())
}

/// A sequence of distinct, successively adjacent vertices.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct Path(Vec<Point>);

impl Path {
    pub fn new(vertices: Vec<Point>) -> Result<Self, GridError> {
        for w in vertices.windows(2) {
            if w[0].manhattan(w[1]) != 1 {
                return Err(GridError::InvalidPath(format!(
                    "{} and {} are not adjacent",
                    w[0], w[1]
                )));
            }
        }
        let mut sorted = vertices.clone();
        sorted.sort();
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(GridError::InvalidPath("vertex repeated".into()));
        }
        Ok(Path(vertices))
    }

    pub(crate) fn from_vec_unchecked(vertices: Vec<Point>) -> Self {
        Path(vertices)
    }

    pub fn vertices(&self) -> &[Point] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn first(&self) -> Option<Point> {
        self.0.first().copied()
    }

    pub fn last(&self) -> Option<Point> {
        self.0.last().copied()
    }

    /// The moves that walk this path from its first vertex.
    pub fn actions(&self) -> Vec<Action> {
        self.0
            .windows(2)
            .map(|w| w[0].direction_to(w[1]).expect("adjacent vertices"))
            .collect()
    }

    /// True when the path starts and ends on the two pins of `net`.
    pub fn connects(&self, net: &Net) -> bool {
        matches!((self.first(), self.last()), (Some(s), Some(e))
            if (s == net.pin_a && e == net.pin_b) || (s == net.pin_b && e == net.pin_a))
    }
}

/// Checks that `paths` is a complete non-intersecting routing of `problem`.
pub fn validate_routing(problem: &RoutingProblem, paths: &[Path]) -> Result<(), GridError> {
    if paths.len() != problem.net_count() {
        return Err(GridError::InvalidRouting(format!(
            "{} paths for {} nets",
            paths.len(),
            problem.net_count()
        )));
    }
    let mut used = vec![0usize; problem.area()];
    for (net, path) in problem.nets().iter().zip(paths) {
        Path::new(path.vertices().to_vec())
            .map_err(|e| GridError::InvalidRouting(format!("net {}: {e}", net.id)))?;
        if !path.connects(net) {
            return Err(GridError::InvalidRouting(format!(
                "path of net {} does not join its pins",
                net.id
            )));
        }
        for &v in path.vertices() {
            if !problem.contains(v) {
                return Err(GridError::InvalidRouting(format!("net {}: {v} out of bounds", net.id)));
            }
            if problem.is_obstacle(v) {
                return Err(GridError::InvalidRouting(format!("net {} crosses obstacle {v}", net.id)));
            }
            if let Some(owner) = problem.pin_owner(v) {
                if owner != net.id {
                    return Err(GridError::InvalidRouting(format!(
                        "net {} crosses pin {v} of net {owner}",
                        net.id
                    )));
                }
            }
            let i = problem.index(v);
            if used[i] != 0 {
                return Err(GridError::InvalidRouting(format!(
                    "nets {} and {} share vertex {v}",
                    used[i], net.id
                )));
            }
            used[i] = net.id;
        }
    }
    Ok(())
}

/// Outcome class of a routing state.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Success,
    Failure,
    Ongoing,
}

/// Cells whose matrix value changed because of one move.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MoveEffect {
    pub from: Point,
    pub to: Point,
    /// Set when the move reached the free pin of the current net.
    pub completed: bool,
    /// Start and target pins of the next net when a completion opened it.
    pub next_net: Option<(Point, Point)>,
}

impl MoveEffect {
    pub fn changed_cells(&self) -> impl Iterator<Item = Point> {
        let (s, t) = match self.next_net {
            Some((s, t)) => (Some(s), Some(t)),
            None => (None, None),
        };
        [Some(self.from), Some(self.to), s, t].into_iter().flatten()
    }
}

/// Routing progress: completed paths, the partial path of the current net,
/// and its head. Nets are routed in list order.
#[derive(Debug, Clone)]
pub struct RoutingState {
    problem: Arc<RoutingProblem>,
    start_sides: Arc<[PinSide]>,
    /// Obstacles plus every path vertex.
    blocked: Vec<bool>,
    completed: Vec<Path>,
    /// 0-based index of the net being routed; equals `k` once all are done.
    current_net: usize,
    current: Vec<Point>,
    wire_hash: u64,
    wire_length: usize,
}

impl PartialEq for RoutingState {
    fn eq(&self, other: &Self) -> bool {
        self.problem == other.problem
            && self.start_sides == other.start_sides
            && self.completed == other.completed
            && self.current_net == other.current_net
            && self.current == other.current
    }
}

const HEAD_SALT: u64 = 0x5EED_0000_0000_0001;
const NET_SALT: u64 = 0x5EED_0000_0000_0002;

fn cell_key(index: usize) -> u64 {
    splitmix64(index as u64)
}

impl RoutingState {
    /// Fresh state with the head on the chosen start pin of net 1.
    pub fn new(problem: Arc<RoutingProblem>, start_sides: Vec<PinSide>) -> Result<Self, GridError> {
        if start_sides.len() != problem.net_count() {
            return Err(GridError::InvalidState(format!(
                "{} start sides for {} nets",
                start_sides.len(),
                problem.net_count()
            )));
        }
        let blocked = problem.obstacle_mask().to_vec();
        let mut state = RoutingState {
            problem,
            start_sides: start_sides.into(),
            blocked,
            completed: Vec::new(),
            current_net: 0,
            current: Vec::new(),
            wire_hash: 0,
            wire_length: 0,
        };
        let start = state.problem.nets()[0].pin(state.start_sides[0]);
        state.occupy(start);
        state.current.push(start);
        Ok(state)
    }

    /// Fresh state starting every net from `pin_a`.
    pub fn initial(problem: Arc<RoutingProblem>) -> Self {
        let k = problem.net_count();
        RoutingState::new(problem, vec![PinSide::A; k]).expect("side count matches")
    }

    fn occupy(&mut self, p: Point) {
        let i = self.problem.index(p);
        self.blocked[i] = true;
        self.wire_hash ^= cell_key(i);
        self.wire_length += 1;
    }

    fn release(&mut self, p: Point) {
        let i = self.problem.index(p);
        self.blocked[i] = self.problem.obstacle_mask()[i];
        self.wire_hash ^= cell_key(i);
        self.wire_length -= 1;
    }

    pub fn problem(&self) -> &RoutingProblem {
        &self.problem
    }

    pub fn problem_arc(&self) -> &Arc<RoutingProblem> {
        &self.problem
    }

    pub fn start_sides(&self) -> &[PinSide] {
        &self.start_sides
    }

    pub fn completed_paths(&self) -> &[Path] {
        &self.completed
    }

    /// Vertices of the partial path of the current net (empty once finished).
    pub fn current_path(&self) -> &[Point] {
        &self.current
    }

    /// The net being routed.
    pub fn current_net(&self) -> Option<&Net> {
        self.problem.nets().get(self.current_net)
    }

    /// 0-based index of the current net; `k` when routing is complete.
    pub fn current_net_index(&self) -> usize {
        self.current_net
    }

    pub fn head(&self) -> Option<Point> {
        self.current.last().copied()
    }

    /// Free pin the current path must reach.
    pub fn target(&self) -> Option<Point> {
        let net = self.current_net()?;
        Some(net.pin(self.start_sides[self.current_net].other()))
    }

    pub fn is_blocked(&self, p: Point) -> bool {
        self.blocked[self.problem.index(p)]
    }

    pub(crate) fn is_blocked_at(&self, index: usize) -> bool {
        self.blocked[index]
    }

    /// Whether the move `a` from the head is legal.
    pub fn is_legal(&self, a: Action) -> bool {
        self.legal_target(a).is_some()
    }

    fn legal_target(&self, a: Action) -> Option<Point> {
        let net = self.current_net()?;
        let head = *self.current.last()?;
        let to = head.step(a, self.problem.width(), self.problem.height())?;
        let i = self.problem.index(to);
        if self.blocked[i] {
            return None;
        }
        match self.problem.pin_owner_at(i) {
            0 => Some(to),
            n if n == net.id => Some(to),
            _ => None,
        }
    }

    /// Moves whose target is in bounds, unblocked, and not a foreign pin.
    pub fn legal_actions(&self) -> ActionSet {
        Action::ALL.into_iter().filter(|&a| self.legal_target(a).is_some()).collect()
    }

    pub fn status(&self) -> Status {
        if self.current_net >= self.problem.net_count() {
            Status::Success
        } else if self.legal_actions().is_empty() {
            Status::Failure
        } else {
            Status::Ongoing
        }
    }

    /// Number of distinct vertices on all paths, the partial one included.
    pub fn total_wire_length(&self) -> usize {
        self.wire_length
    }

    /// 64-bit hash of the state matrix: path vertices, head, current net.
    pub fn fingerprint(&self) -> u64 {
        let head = self.head().map_or(0, |h| splitmix64(self.problem.index(h) as u64 ^ HEAD_SALT));
        self.wire_hash ^ head ^ splitmix64(self.current_net as u64 ^ NET_SALT)
    }

    /// Value-semantics transition.
    pub fn apply_action(&self, a: Action) -> Result<RoutingState, GridError> {
        let mut next = self.clone();
        next.apply_in_place(a)?;
        Ok(next)
    }

    /// Applies a legal move in place. When it reaches the current net's free
    /// pin the path is completed and the next net starts from its chosen pin.
    pub fn apply_in_place(&mut self, a: Action) -> Result<MoveEffect, GridError> {
        let head = self.head().ok_or(GridError::Finished)?;
        let to = self
            .legal_target(a)
            .ok_or(GridError::IllegalAction { action: a, head })?;
        self.occupy(to);
        self.current.push(to);
        let mut effect = MoveEffect {
            from: head,
            to,
            completed: false,
            next_net: None,
        };
        if Some(to) == self.target() {
            effect.completed = true;
            let done = std::mem::take(&mut self.current);
            self.completed.push(Path::from_vec_unchecked(done));
            self.current_net += 1;
            if let Some(net) = self.problem.nets().get(self.current_net).copied() {
                let side = self.start_sides[self.current_net];
                let start = net.pin(side);
                self.occupy(start);
                self.current.push(start);
                effect.next_net = Some((start, net.pin(side.other())));
            }
        }
        Ok(effect)
    }

    /// Reverts the most recent [`apply_in_place`](Self::apply_in_place).
    pub fn undo(&mut self, effect: &MoveEffect) {
        if effect.completed {
            if effect.next_net.is_some() {
                let start = self.current.pop().expect("next net started");
                self.release(start);
            }
            self.current_net -= 1;
            self.current = self.completed.pop().expect("completed path").0;
        }
        let to = self.current.pop().expect("moved vertex");
        debug_assert_eq!(to, effect.to);
        self.release(to);
    }

    /// Integer picture of the state, the network input.
    pub fn state_matrix(&self) -> StateMatrix {
        let p = &*self.problem;
        let mut cells = vec![0i32; p.area()];
        for (i, c) in cells.iter_mut().enumerate() {
            *c = if self.blocked[i] {
                -1
            } else {
                p.pin_owner_at(i) as i32
            };
        }
        let head = self.head();
        let net = self.current_net().map(|n| n.id);
        if let (Some(h), Some(n)) = (head, net) {
            cells[p.index(h)] = n as i32;
        }
        StateMatrix {
            width: p.width(),
            height: p.height(),
            cells,
            head,
            current_net: net.unwrap_or(0),
        }
    }

    /// Full structural check of every state invariant.
    pub fn validate(&self) -> Result<(), GridError> {
        let p = &*self.problem;
        let bad = |m: String| Err(GridError::InvalidState(m));
        if self.completed.len() != self.current_net {
            return bad(format!(
                "{} completed paths but current net index {}",
                self.completed.len(),
                self.current_net
            ));
        }
        let mut used = vec![false; p.area()];
        let mut count = 0;
        let all = self.completed.iter().map(|c| c.vertices()).chain(std::iter::once(&self.current[..]));
        for (n, path) in all.enumerate() {
            for w in path.windows(2) {
                if w[0].manhattan(w[1]) != 1 {
                    return bad(format!("path {} has a gap between {} and {}", n + 1, w[0], w[1]));
                }
            }
            for &v in path {
                let i = p.index(v);
                if p.is_obstacle(v) {
                    return bad(format!("path vertex {v} is an obstacle"));
                }
                if used[i] {
                    return bad(format!("vertex {v} used twice"));
                }
                if let Some(owner) = p.pin_owner(v) {
                    if owner != n + 1 {
                        return bad(format!("path {} crosses pin of net {owner}", n + 1));
                    }
                }
                used[i] = true;
                count += 1;
            }
        }
        for (n, path) in self.completed.iter().enumerate() {
            if !path.connects(&p.nets()[n]) {
                return bad(format!("completed path {} does not join its pins", n + 1));
            }
        }
        if let Some(net) = self.current_net() {
            let start = net.pin(self.start_sides[self.current_net]);
            if self.current.first() != Some(&start) {
                return bad("current path does not begin at the start pin".into());
            }
            if self.current.contains(&net.pin(self.start_sides[self.current_net].other())) {
                return bad("current path already holds its target pin".into());
            }
        } else if !self.current.is_empty() {
            return bad("finished state with a partial path".into());
        }
        for i in 0..p.area() {
            if self.blocked[i] != (used[i] || p.obstacle_mask()[i]) {
                return bad(format!("blocked mask disagrees at {}", p.point(i)));
            }
        }
        if count != self.wire_length {
            return bad(format!("wire length {} but {count} vertices", self.wire_length));
        }
        Ok(())
    }

    /// All paths, the partial one last when routing is unfinished.
    pub fn paths(&self) -> Vec<Path> {
        let mut v = self.completed.clone();
        if !self.current.is_empty() {
            v.push(Path::from_vec_unchecked(self.current.clone()));
        }
        v
    }
}

/// Dense integer grid of a state: the head holds the current net id, blocked
/// cells hold -1, unvisited pins their net id, and free cells 0.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StateMatrix {
    pub width: usize,
    pub height: usize,
    /// Row-major, row `y`.
    pub cells: Vec<i32>,
    pub head: Option<Point>,
    /// 1-based id of the net being routed, 0 once all nets are done.
    pub current_net: usize,
}

impl StateMatrix {
    pub fn get(&self, x: usize, y: usize) -> i32 {
        self.cells[y * self.width + x]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[i32]> {
        self.cells.chunks(self.width)
    }
}
