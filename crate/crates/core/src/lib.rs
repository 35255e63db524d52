//! Single-layer grid circuit routing.
//!
//! Two-pin nets are connected by vertex-disjoint paths on a grid with
//! obstacles. The main router is a Monte Carlo tree search whose rollouts are
//! depth-first searches ordered by a small convolutional policy; sequential
//! A* and Lee routers serve as baselines.

pub mod baselines;
pub mod bench;
pub mod format;
pub mod generator;
pub mod grid;
pub mod mcts;
pub mod policy;
pub mod render;
pub mod rng;
pub mod rollout;

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/grid.md")]
    mod grid {}
    #[doc = include_str!("../../../book/src/search.md")]
    mod search {}
    #[doc = include_str!("../../../book/src/rollout.md")]
    mod rollout {}
    #[doc = include_str!("../../../book/src/baselines.md")]
    mod baselines {}
    #[doc = include_str!("../../../book/src/generator.md")]
    mod generator {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
