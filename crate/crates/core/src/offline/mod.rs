//! Static placement for the discrete problem: Greedy, LocalSwap, their
//! cascade, constrained variants and an exhaustive oracle.

pub mod brute;
pub mod greedy;
pub mod local_swap;
pub mod state;

pub use brute::{brute_force_optimal, configuration_count, BruteLimits};
pub use greedy::{greedy_place, greedy_place_constrained, GreedyResult, GreedyStep};
pub use local_swap::{
    cascade_place, cascade_place_constrained, check_constraint, constrained_local_swap, is_locally_optimal,
    local_swap, locally_optimal_within, CascadeResult, LocalSwapResult, RequestSource, StopRule, SwapTraceEntry,
};
pub use state::{Admissible, Move, PlacementState};
