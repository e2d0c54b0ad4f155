//! Rate regions for erasure broadcast channels where the transmitter has
//! delayed state feedback and an imperfect estimate of the current state.
//!
//! - [`state`] builds the joint law of states and estimates, either from
//!   the LoS-ball vehicular model or from a CSV table.
//! - [`region`] evaluates the exact two-receiver region and its symmetric
//!   rate.
//! - [`solver`] searches the K-receiver scheduling program.
//! - [`sim`] replays a two-receiver policy slot by slot with queues.
//! - [`experiments`] reproduces the density and velocity studies.

// Negated comparisons are used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod experiments;
pub mod lp;
pub mod region;
pub mod sim;
pub mod solver;
pub mod state;

pub use error::{Error, Result};
