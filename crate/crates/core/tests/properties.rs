use std::collections::HashSet;
use std::sync::Arc;

use circuit_router::baselines::{
    astar_route_net, blocked_from_points, exhaustive_optimal, lee_route_net, sequential_route, shortest_length_lower_bound,
    Algorithm,
};
use circuit_router::format::{parse_circuit, write_circuit};
use circuit_router::grid::{validate_routing, Net, PinSide, Point, RoutingProblem, RoutingState, Status};
use circuit_router::mcts::{reward, route, search_with_tree, RolloutPolicy, SearchConfig, UctMode};
use circuit_router::policy::encode_input;
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Random board with up to `max_nets` nets on distinct cells and about a
/// tenth obstacles. Connectivity is not guaranteed.
fn random_problem(w: usize, h: usize, max_nets: usize, seed: u64) -> RoutingProblem {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cells: Vec<Point> = (0..h).flat_map(|y| (0..w).map(move |x| Point::new(x, y))).collect();
    cells.shuffle(&mut rng);
    let k = rng.gen_range(1..=max_nets);
    let nets: Vec<Net> = (0..k).map(|i| Net::new(i + 1, cells[2 * i], cells[2 * i + 1])).collect();
    let obstacles = cells[2 * k..].iter().copied().filter(|_| rng.gen_bool(0.1)).collect::<Vec<_>>();
    RoutingProblem::new(w, h, obstacles, nets).expect("distinct cells")
}

fn board() -> impl Strategy<Value = (usize, usize, u64)> {
    (3usize..=7, 3usize..=7, any::<u64>())
}

/// Walks random legal moves to a terminal state, checking the state after
/// every move.
fn random_walk(problem: RoutingProblem, seed: u64) -> RoutingState {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sides = (0..problem.net_count()).map(|_| if rng.gen_bool(0.5) { PinSide::A } else { PinSide::B }).collect();
    let mut state = RoutingState::new(Arc::new(problem), sides).unwrap();
    while state.status() == Status::Ongoing {
        let moves = state.legal_actions().to_vec();
        state.apply_in_place(*moves.choose(&mut rng).unwrap()).unwrap();
        state.validate().unwrap();
    }
    state
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn random_trajectories_keep_paths_disjoint((w, h, seed) in board()) {
        let problem = random_problem(w, h, 3, seed);
        let state = random_walk(problem.clone(), seed ^ 1);
        let mut seen = HashSet::new();
        let done = state.completed_paths();
        for (path, net) in done.iter().zip(problem.nets()) {
            prop_assert!(path.connects(net));
            for &v in path.vertices() {
                prop_assert!(!problem.is_obstacle(v));
                prop_assert!(seen.insert(v), "vertex {} used twice", v);
            }
        }
        for &v in state.current_path() {
            prop_assert!(seen.insert(v), "vertex {} used twice", v);
        }
        if state.status() == Status::Success {
            prop_assert!(validate_routing(&problem, done).is_ok());
        }
        let m = state.state_matrix();
        for &v in done.iter().flat_map(|p| p.vertices()).chain(state.current_path()) {
            let want = match state.head() {
                Some(head) if head == v => (state.current_net_index() + 1) as i32,
                _ => -1,
            };
            prop_assert_eq!(m.get(v.x, v.y), want);
        }
    }

    #[test]
    fn terminal_rewards_are_bounded((w, h, seed) in board()) {
        let problem = random_problem(w, h, 3, seed);
        let area = problem.area() as f64;
        let state = random_walk(problem, seed);
        let r = reward(&state).unwrap();
        prop_assert!(r >= 1.0 / area - 1e-15 && r <= 1.0, "reward {}", r);
        if state.status() == Status::Success {
            prop_assert_eq!(r, 1.0 / state.total_wire_length() as f64);
        } else {
            prop_assert_eq!(r, 1.0 / area);
        }
    }

    #[test]
    fn lee_and_astar_agree_on_length((w, h, seed) in (4usize..=12, 4usize..=12, any::<u64>())) {
        let problem = random_problem(w, h, 4, seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 7);
        let pins: HashSet<Point> = problem.nets().iter().flat_map(|n| [n.pin_a, n.pin_b]).collect();
        let extra: Vec<Point> = (0..problem.area())
            .map(|i| problem.point(i))
            .filter(|p| !pins.contains(p) && rng.gen_bool(0.15))
            .collect();
        let blocked = blocked_from_points(&problem, extra);
        for net in problem.nets() {
            let lee = lee_route_net(&problem, &blocked, net);
            let astar = astar_route_net(&problem, &blocked, net);
            prop_assert_eq!(lee.as_ref().map(|p| p.len()), astar.as_ref().map(|p| p.len()));
            for path in lee.iter().chain(astar.iter()) {
                prop_assert!(path.connects(net));
                prop_assert!(path.vertices().iter().all(|&v| !blocked[problem.index(v)] && !problem.is_obstacle(v)));
            }
        }
    }

    #[test]
    fn circuit_text_round_trips((w, h, seed) in board()) {
        let problem = random_problem(w, h, 3, seed);
        prop_assert_eq!(parse_circuit(&write_circuit(&problem)).unwrap(), problem);
    }

    #[test]
    fn encoding_ignores_which_foreign_net_a_pin_belongs_to((w, h, seed) in board()) {
        let problem = random_problem(w, h, 3, seed);
        prop_assume!(problem.net_count() == 3);
        // Nets 2 and 3 trade pins: the same cells carry swapped labels.
        let state = RoutingState::initial(Arc::new(problem.clone()));
        let n = problem.nets();
        let swapped = RoutingProblem::new(
            w,
            h,
            problem.obstacles().iter().copied(),
            vec![n[0], Net::new(2, n[2].pin_a, n[2].pin_b), Net::new(3, n[1].pin_a, n[1].pin_b)],
        )
        .unwrap();
        let relabeled = RoutingState::initial(Arc::new(swapped));
        prop_assert_eq!(encode_input(&state.state_matrix()), encode_input(&relabeled.state_matrix()));
    }

    #[test]
    fn tree_visits_add_up((w, h, seed) in (3usize..=5, 3usize..=5, any::<u64>()), iterations in 1usize..120, max in any::<bool>(), random in any::<bool>()) {
        let problem = random_problem(w, h, 2, seed);
        let state = RoutingState::initial(Arc::new(problem));
        prop_assume!(state.status() == Status::Ongoing);
        let cfg = SearchConfig {
            iterations,
            uct_mode: if max { UctMode::Maximum } else { UctMode::Average },
            rollout_policy: if random { RolloutPolicy::Random } else { RolloutPolicy::DnnDfs },
            seed,
            ..SearchConfig::default()
        };
        let (_, tree) = search_with_tree(&state, &cfg, None).unwrap();
        prop_assert_eq!(tree.nodes[0].stats.visits as usize, iterations);
        for n in &tree.nodes {
            let below: u32 = n.children.iter().map(|&c| tree.nodes[c].stats.visits).sum();
            prop_assert_eq!(n.stats.visits, n.direct_visits + below);
            prop_assert!(n.stats.reward_max <= 1.0);
            if n.stats.visits > 0 {
                prop_assert!(n.stats.reward_max >= n.stats.mean() - 1e-12);
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn nothing_beats_the_exhaustive_optimum((w, h, seed) in (3usize..=6, 3usize..=6, any::<u64>())) {
        let problem = random_problem(w, h, 2, seed);
        let best = exhaustive_optimal(&problem).unwrap();
        let routed = route(&problem, &SearchConfig { iterations: 200, seed, ..SearchConfig::default() }, None).unwrap();
        match best {
            Some(best) => {
                prop_assert!(validate_routing(&problem, &best.paths).is_ok());
                prop_assert!(best.total_length >= shortest_length_lower_bound(&problem).unwrap());
                if routed.success {
                    prop_assert!(routed.total_length >= best.total_length);
                }
            }
            None => prop_assert!(!routed.success),
        }
        let astar = sequential_route(&problem, Algorithm::AStar);
        if astar.success {
            prop_assert!(best_len(&problem) <= Some(astar.total_length));
        }
    }
}

fn best_len(problem: &RoutingProblem) -> Option<usize> {
    exhaustive_optimal(problem).unwrap().map(|r| r.total_length)
}
