//! Random solvable circuits and supervised training data.
//!
//! A circuit is built around `k` vertex-disjoint self-avoiding random walks
//! carved on the empty board. The two ends of each walk become the pins of a
//! net and obstacles are scattered over cells no walk touches, so the walks
//! themselves are a valid routing and every generated problem is solvable.

use std::fmt::Write as _;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::baselines::{best_order_route, sequential_route, Algorithm, ORDERING_MAX_NETS};
use crate::grid::{validate_routing, Action, GridError, Net, Path, PinSide, Point, RoutingProblem, RoutingState, StateMatrix};
use crate::mcts::{route_guided, RolloutPolicy, RouteResult, SearchConfig, UctMode};
use crate::rollout::Guide;
use crate::rng::{derive_seed, stream_rng, Stream};

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorConfig {
    pub width: usize,
    pub height: usize,
    /// Net count is drawn uniformly from `min_nets..=max_nets`.
    pub min_nets: usize,
    pub max_nets: usize,
    /// Share of the board turned into obstacles, at most 0.3.
    pub obstacle_fraction: f64,
    /// Vertex count range of each carved walk.
    pub min_walk: usize,
    pub max_walk: usize,
    /// Probability of leaving the current heading at each step of a walk.
    pub turn_probability: f64,
    pub seed: u64,
}

impl GeneratorConfig {
    /// Square board with the default net, obstacle, and walk settings.
    pub fn new(size: usize, seed: u64) -> Self {
        let min_walk = (size * 2 / 3).clamp(2, (size * size).max(2));
        GeneratorConfig {
            width: size,
            height: size,
            min_nets: 3,
            max_nets: 8,
            obstacle_fraction: 0.1,
            min_walk,
            max_walk: (size * 8 / 3).max(min_walk),
            turn_probability: 0.15,
            seed,
        }
    }

    /// Fixes the net count to `k`.
    pub fn with_nets(mut self, k: usize) -> Self {
        self.min_nets = k;
        self.max_nets = k;
        self
    }

    pub fn with_obstacles(mut self, fraction: f64) -> Self {
        self.obstacle_fraction = fraction;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<(), GeneratorError> {
        let bad = |m: &str| Err(GeneratorError::Config(m.to_string()));
        if self.width == 0 || self.height == 0 {
            return bad("board dimensions must be positive");
        }
        if self.min_nets == 0 || self.min_nets > self.max_nets {
            return bad("net range must satisfy 1 <= min_nets <= max_nets");
        }
        if !(0.0..=0.3).contains(&self.obstacle_fraction) {
            return bad("obstacle fraction must lie in [0, 0.3]");
        }
        if self.min_walk < 2 || self.min_walk > self.max_walk {
            return bad("walk range must satisfy 2 <= min_walk <= max_walk");
        }
        if !(0.0..=1.0).contains(&self.turn_probability) {
            return bad("turn probability must lie in [0, 1]");
        }
        let area = self.width * self.height;
        let obstacles = (self.obstacle_fraction * area as f64).round() as usize;
        if self.max_nets * self.min_walk + obstacles > area {
            return Err(GeneratorError::TooSmall {
                area,
                nets: self.max_nets,
            });
        }
        Ok(())
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeneratorError {
    #[error("generator configuration: {0}")]
    Config(String),
    #[error("a board of area {area} cannot host {nets} nets with the requested walks and obstacles")]
    TooSmall { area: usize, nets: usize },
    #[error("no circuit found after {rounds} rejection rounds")]
    GaveUp { rounds: usize },
    #[error(transparent)]
    Grid(#[from] GridError),
}

/// Rejection rounds before generation gives up.
pub const MAX_ROUNDS: usize = 200;
const WALK_ATTEMPTS: usize = 50;

/// A generated problem with the carved walks that prove it solvable.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratedCircuit {
    pub problem: RoutingProblem,
    pub witness: Vec<Path>,
}

/// Self-avoiding walk over free cells that tends to keep its heading.
fn carve_walk(rng: &mut ChaCha8Rng, taken: &mut [bool], cfg: &GeneratorConfig, target: usize) -> Option<Vec<Point>> {
    let (w, h) = (cfg.width, cfg.height);
    let free: Vec<usize> = (0..w * h).filter(|&i| !taken[i]).collect();
    let &start = free.choose(rng)?;
    let mut walk = vec![Point::new(start % w, start / w)];
    taken[start] = true;
    let mut heading = Action::ALL[rng.gen_range(0..4)];
    while walk.len() < target {
        let here = *walk.last().expect("walk starts non-empty");
        let open: Vec<Action> = Action::ALL
            .into_iter()
            .filter(|&a| here.step(a, w, h).is_some_and(|p| !taken[p.y * w + p.x]))
            .collect();
        if open.is_empty() {
            break;
        }
        if !open.contains(&heading) || rng.gen_bool(cfg.turn_probability) {
            heading = *open.choose(rng).expect("non-empty");
        }
        let next = here.step(heading, w, h).expect("open move stays on the board");
        taken[next.y * w + next.x] = true;
        walk.push(next);
    }
    if walk.len() >= cfg.min_walk {
        Some(walk)
    } else {
        for p in &walk {
            taken[p.y * w + p.x] = false;
        }
        None
    }
}

fn try_generate(rng: &mut ChaCha8Rng, cfg: &GeneratorConfig, k: usize) -> Result<Option<GeneratedCircuit>, GeneratorError> {
    let (w, h) = (cfg.width, cfg.height);
    let mut taken = vec![false; w * h];
    let mut walks = Vec::with_capacity(k);
    for _ in 0..k {
        let target = rng.gen_range(cfg.min_walk..=cfg.max_walk);
        let walk = (0..WALK_ATTEMPTS).find_map(|_| carve_walk(rng, &mut taken, cfg, target));
        match walk {
            Some(walk) => walks.push(walk),
            None => return Ok(None),
        }
    }
    let mut spare: Vec<usize> = (0..w * h).filter(|&i| !taken[i]).collect();
    let count = ((cfg.obstacle_fraction * (w * h) as f64).round() as usize).min(spare.len());
    let (chosen, _) = spare.partial_shuffle(rng, count);
    let obstacles: Vec<Point> = chosen.iter().map(|&i| Point::new(i % w, i / w)).collect();
    let nets = walks
        .iter()
        .enumerate()
        .map(|(n, walk)| Net::new(n + 1, walk[0], *walk.last().expect("walk has two ends")))
        .collect();
    let problem = RoutingProblem::new(w, h, obstacles, nets)?;
    let witness = walks.into_iter().map(Path::from_vec_unchecked).collect::<Vec<_>>();
    Ok(Some(GeneratedCircuit { problem, witness }))
}

/// Generates a circuit together with its witness routing.
pub fn generate_with_witness(cfg: &GeneratorConfig) -> Result<GeneratedCircuit, GeneratorError> {
    cfg.validate()?;
    let mut rng = stream_rng(cfg.seed, Stream::Circuit);
    let k = rng.gen_range(cfg.min_nets..=cfg.max_nets);
    for _ in 0..MAX_ROUNDS {
        if let Some(c) = try_generate(&mut rng, cfg, k)? {
            debug_assert!(validate_routing(&c.problem, &c.witness).is_ok());
            return Ok(c);
        }
    }
    Err(GeneratorError::GaveUp { rounds: MAX_ROUNDS })
}

pub fn generate_circuit(cfg: &GeneratorConfig) -> Result<RoutingProblem, GeneratorError> {
    Ok(generate_with_witness(cfg)?.problem)
}

/// `count` circuits; circuit `i` uses the seed `derive_seed(cfg.seed, i)`.
pub fn generate_corpus(cfg: &GeneratorConfig, count: usize) -> Result<Vec<GeneratedCircuit>, GeneratorError> {
    (0..count)
        .map(|i| generate_with_witness(&cfg.clone().with_seed(derive_seed(cfg.seed, i as u64))))
        .collect()
}

/// A state matrix and the move that continues the reference routing.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrainingSample {
    pub matrix: StateMatrix,
    pub label: Action,
}

/// One sample per net: a uniformly chosen non-final vertex of that net's path
/// becomes the head, with all earlier nets routed.
pub fn extract_training_samples(
    problem: &RoutingProblem,
    solution: &[Path],
    seed: u64,
) -> Result<Vec<TrainingSample>, GridError> {
    validate_routing(problem, solution)?;
    let sides: Vec<PinSide> = problem
        .nets()
        .iter()
        .zip(solution)
        .map(|(net, path)| if path.first() == Some(net.pin_a) { PinSide::A } else { PinSide::B })
        .collect();
    let mut rng = stream_rng(seed, Stream::Sample);
    let mut state = RoutingState::new(Arc::new(problem.clone()), sides)?;
    let mut samples = Vec::with_capacity(solution.len());
    for path in solution {
        let actions = path.actions();
        let j = rng.gen_range(0..actions.len());
        let mut effects = Vec::with_capacity(j);
        for &a in &actions[..j] {
            effects.push(state.apply_in_place(a)?);
        }
        samples.push(TrainingSample {
            matrix: state.state_matrix(),
            label: actions[j],
        });
        for fx in effects.iter().rev() {
            state.undo(fx);
        }
        for &a in &actions {
            state.apply_in_place(a)?;
        }
    }
    Ok(samples)
}

/// Seeded shuffle, then the first `floor(ratio * n)` samples train.
pub fn split_dataset<T: Clone>(samples: &[T], ratio: f64, seed: u64) -> (Vec<T>, Vec<T>) {
    assert!(ratio > 0.0 && ratio < 1.0, "split ratio must lie in (0, 1)");
    let mut order: Vec<usize> = (0..samples.len()).collect();
    order.shuffle(&mut stream_rng(seed, Stream::Split));
    let cut = (ratio * samples.len() as f64).floor() as usize;
    let pick = |idx: &[usize]| idx.iter().map(|&i| samples[i].clone()).collect::<Vec<_>>();
    (pick(&order[..cut]), pick(&order[cut..]))
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DatasetError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
}

/// Writes `sample <net_id> <label> <head_x> <head_y>` records, each followed
/// by the matrix rows from `y = 0` upward.
pub fn write_dataset(samples: &[TrainingSample]) -> String {
    let mut out = String::new();
    for s in samples {
        let head = s.matrix.head.expect("samples have a head");
        writeln!(out, "sample {} {} {} {}", s.matrix.current_net, s.label, head.x, head.y).expect("string write");
        for row in s.matrix.rows() {
            let line: Vec<String> = row.iter().map(i32::to_string).collect();
            writeln!(out, "{}", line.join(" ")).expect("string write");
        }
    }
    out
}

pub fn parse_dataset(text: &str) -> Result<Vec<TrainingSample>, DatasetError> {
    let err = |line: usize, message: &str| DatasetError::Syntax {
        line,
        message: message.to_string(),
    };
    let mut samples = Vec::new();
    let mut lines = text.lines().enumerate().peekable();
    while let Some((n, line)) = lines.next() {
        let line_no = n + 1;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 5 || fields[0] != "sample" {
            return Err(err(line_no, "expected `sample <net> <label> <x> <y>`"));
        }
        let num = |s: &str| s.parse::<usize>().map_err(|_| err(line_no, "bad number"));
        let net = num(fields[1])?;
        let label: Action = fields[2].parse().map_err(|_| err(line_no, "bad label"))?;
        let head = Point::new(num(fields[3])?, num(fields[4])?);
        let mut cells = Vec::new();
        let mut width = None;
        let mut height = 0;
        while let Some((m, row)) = lines.peek() {
            if row.starts_with("sample") {
                break;
            }
            let row_no = m + 1;
            let vals = row
                .split_whitespace()
                .map(|v| v.parse::<i32>().map_err(|_| err(row_no, "bad cell value")))
                .collect::<Result<Vec<_>, _>>()?;
            if vals.is_empty() {
                lines.next();
                continue;
            }
            if *width.get_or_insert(vals.len()) != vals.len() {
                return Err(err(row_no, "ragged matrix row"));
            }
            cells.extend(vals);
            height += 1;
            lines.next();
        }
        let width = width.ok_or_else(|| err(line_no, "sample without matrix"))?;
        if head.x >= width || head.y >= height {
            return Err(err(line_no, "head outside the matrix"));
        }
        samples.push(TrainingSample {
            matrix: StateMatrix {
                width,
                height,
                cells,
                head: Some(head),
                current_net: net,
            },
            label,
        });
    }
    Ok(samples)
}

/// Net orders tried on circuits too large for the full ordering search.
pub const RANDOM_ORDERS: usize = 720;

/// Sequential A* under up to `tries` seeded random net orders; paths come
/// back in original net order.
fn shuffled_order_route(problem: &RoutingProblem, tries: usize, seed: u64) -> Option<RouteResult> {
    let mut rng = stream_rng(seed, Stream::Shuffle);
    let mut order: Vec<usize> = (0..problem.net_count()).collect();
    for _ in 0..tries {
        order.shuffle(&mut rng);
        let r = sequential_route(&problem.reordered(&order).expect("permutation"), Algorithm::AStar);
        if r.success {
            let mut paths = vec![Path::default(); order.len()];
            for (pos, &orig) in order.iter().enumerate() {
                paths[orig] = r.paths[pos].clone();
            }
            return Some(RouteResult { paths, ..r });
        }
    }
    None
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetConfig {
    pub circuits: usize,
    /// Board and net settings; the seed is replaced per circuit.
    pub generator: GeneratorConfig,
    pub seed: u64,
    /// Search iterations of the fallback router.
    pub fallback_iterations: usize,
}

/// Samples and bookkeeping of a dataset build.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub samples: Vec<TrainingSample>,
    pub circuits: usize,
    pub routed_by_astar: usize,
    /// Circuits A* routed only after reordering the nets.
    pub routed_by_reordering: usize,
    pub routed_by_search: usize,
    pub skipped: usize,
}

/// Generates circuits, routes each with sequential A* (in net order, then
/// over all net orders for small circuits and [`RANDOM_ORDERS`] shuffled
/// orders for larger ones) or, failing that, tree search with
/// a distance-ordered depth-first rollout, and extracts one sample per net.
/// Circuits no router solves are skipped.
pub fn build_dataset(cfg: &DatasetConfig) -> Result<Dataset, GeneratorError> {
    let mut data = Dataset {
        samples: Vec::new(),
        circuits: cfg.circuits,
        routed_by_astar: 0,
        routed_by_reordering: 0,
        routed_by_search: 0,
        skipped: 0,
    };
    for i in 0..cfg.circuits {
        let seed = derive_seed(cfg.seed, i as u64);
        let circuit = generate_circuit(&cfg.generator.clone().with_seed(seed))?;
        let astar = sequential_route(&circuit, Algorithm::AStar);
        let reordered = if astar.success {
            None
        } else if circuit.net_count() <= ORDERING_MAX_NETS {
            best_order_route(&circuit, Algorithm::AStar)
                .expect("net count checked")
                .map(|(_, r)| r)
        } else {
            shuffled_order_route(&circuit, RANDOM_ORDERS, derive_seed(seed, Stream::Dataset as u64))
        };
        let paths = if astar.success {
            data.routed_by_astar += 1;
            astar.paths
        } else if let Some(r) = reordered {
            data.routed_by_reordering += 1;
            r.paths
        } else {
            let search = SearchConfig {
                iterations: cfg.fallback_iterations.max(1),
                uct_mode: UctMode::Maximum,
                rollout_policy: RolloutPolicy::DnnDfs,
                seed: derive_seed(seed, Stream::Dataset as u64),
                ..SearchConfig::default()
            };
            let r = route_guided(&circuit, &search, Guide::Distance).map_err(|e| GeneratorError::Config(e.to_string()))?;
            if !r.success {
                data.skipped += 1;
                continue;
            }
            data.routed_by_search += 1;
            r.paths
        };
        data.samples.extend(extract_training_samples(&circuit, &paths, seed)?);
    }
    Ok(data)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn witness_routes_the_problem() {
        let cfg = GeneratorConfig::new(30, 7).with_nets(5);
        let c = generate_with_witness(&cfg).unwrap();
        assert_eq!(c.problem.net_count(), 5);
        validate_routing(&c.problem, &c.witness).unwrap();
        let obstacles = c.problem.obstacles().len();
        assert_eq!(obstacles, 90);
    }

    #[test]
    fn tiny_open_board() {
        let mut cfg = GeneratorConfig::new(3, 1).with_nets(1).with_obstacles(0.0);
        cfg.min_walk = 2;
        cfg.max_walk = 9;
        let c = generate_with_witness(&cfg).unwrap();
        assert_eq!(c.problem.net_count(), 1);
        assert!(c.problem.obstacles().is_empty());
        validate_routing(&c.problem, &c.witness).unwrap();
    }

    #[test]
    fn generation_is_deterministic() {
        let cfg = GeneratorConfig::new(30, 99);
        assert_eq!(generate_with_witness(&cfg).unwrap(), generate_with_witness(&cfg).unwrap());
        let other = generate_circuit(&cfg.clone().with_seed(100)).unwrap();
        assert_ne!(generate_circuit(&cfg).unwrap(), other);
    }

    #[test]
    fn bad_configs_are_rejected() {
        let mut cfg = GeneratorConfig::new(30, 0);
        cfg.obstacle_fraction = 0.5;
        assert!(matches!(generate_circuit(&cfg), Err(GeneratorError::Config(_))));
        let cramped = GeneratorConfig::new(4, 0).with_nets(8);
        assert!(matches!(generate_circuit(&cramped), Err(GeneratorError::TooSmall { .. })));
    }

    #[test]
    fn one_sample_per_net_with_legal_labels() {
        let c = generate_with_witness(&GeneratorConfig::new(30, 3).with_nets(5)).unwrap();
        let samples = extract_training_samples(&c.problem, &c.witness, 11).unwrap();
        assert_eq!(samples.len(), 5);
        for (n, s) in samples.iter().enumerate() {
            assert_eq!(s.matrix.current_net, n + 1);
            let head = s.matrix.head.unwrap();
            let to = head.step(s.label, 30, 30).unwrap();
            let v = s.matrix.get(to.x, to.y);
            assert!(v == 0 || v == (n + 1) as i32, "label enters cell valued {v}");
        }
    }

    #[test]
    fn two_vertex_path_labels_onto_the_pin() {
        let p = RoutingProblem::new(2, 1, [], vec![Net::new(1, Point::new(0, 0), Point::new(1, 0))]).unwrap();
        let path = Path::new(vec![Point::new(1, 0), Point::new(0, 0)]).unwrap();
        let s = extract_training_samples(&p, &[path], 0).unwrap();
        assert_eq!(s.len(), 1);
        assert_eq!(s[0].label, Action::Left);
        assert_eq!(s[0].matrix.head, Some(Point::new(1, 0)));
    }

    #[test]
    fn split_is_floor_and_seeded() {
        let v: Vec<usize> = (0..9459).collect();
        let (a, b) = split_dataset(&v, 0.8, 5);
        assert_eq!((a.len(), b.len()), (7567, 1892));
        let mut all: Vec<usize> = a.iter().chain(&b).copied().collect();
        all.sort_unstable();
        assert_eq!(all, v);
        assert_eq!(split_dataset(&v, 0.8, 5), (a, b));
        let (c, d) = split_dataset(&v[..100], 0.8, 1);
        assert_eq!((c.len(), d.len()), (80, 20));
    }

    #[test]
    fn dataset_text_round_trips() {
        let c = generate_with_witness(&GeneratorConfig::new(12, 4).with_nets(3)).unwrap();
        let samples = extract_training_samples(&c.problem, &c.witness, 2).unwrap();
        let text = write_dataset(&samples);
        assert_eq!(parse_dataset(&text).unwrap(), samples);
        assert!(parse_dataset("sample 1 up 0 0\n").is_err());
        assert!(parse_dataset("sample 1 sideways 0 0\n0 0\n").is_err());
    }
}
