//! Achievable rates for `K` receivers: scheduling weights over private,
//! common and mixed signals, with downgrading of overheard side information.

mod alternating;
mod program;
mod sets;

pub use alternating::{initial_beta, solve, Objective, SchedulingSolution, SolveOptions};
pub use program::{AlphaPolicy, BetaGroup, BetaKey, BetaLayout, BetaPolicy, Program};
pub use sets::{jc_set, overhearing_set, sc_set, Action, ActionSet, Subset};
