//! Simulation laboratory for the minimal random walk: a {0,1}-step walk
//! with full memory reinforcement, where each step revisits a uniformly
//! chosen past step and imitates it through a Bernoulli(p) coin (past 1)
//! or a Bernoulli(q) coin (past 0), starting from a Bernoulli(s) first
//! step.
//!
//! The crate pairs exact, simulation-free oracles (dynamic-programming
//! distribution, moment recursions and closed forms, limit constants)
//! with reproducible Monte Carlo experiments that check the walk's limit
//! theorems — strong laws, quadratic strong laws, central limit theorems,
//! functional covariance structure, and the superdiffusive fluctuation
//! law — each against its closed-form constant.

pub mod error;
pub mod martingale;
pub mod numeric;
pub mod oracle;
pub mod process;
pub mod rng;
pub mod sequences;
pub mod stats;

pub use error::{Error, Result};
pub use process::{
    classify, final_positions, simulate_batch, simulate_collapsed, simulate_full_memory,
    step_probability, Path, PositionIter, Regime, Sampler, WalkParams,
};
pub use rng::RngStream;
