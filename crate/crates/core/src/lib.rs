//! Simulation and exact-computation toolkit for escape times of the elephant
//! random walk (ERW): the first time the walk's absolute value reaches a
//! barrier N, viewed as a gambler's-ruin duration with memory.
//!
//! The crate is organized around two independent routes to the same
//! quantities, which check each other:
//!
//! * [`exact`] pushes the absorbing time-inhomogeneous kernel forward to get
//!   sampling-free survival curves and expected escape times, plus the
//!   classical closed forms for the simple random walk.
//! * [`estimators`] runs reproducible parallel Monte Carlo over per-replicate
//!   [`rng`] streams, with confidence intervals, tail-slope fits, and
//!   quadratic-scaling (theta) analysis.
//!
//! [`couplings`] builds ERW/SRW and ERW/asymmetric-walk pairs from a single
//! uniform stream and enforces their pathwise ordering as hard invariants;
//! [`limit`] samples the limiting Gaussian process on a grid and estimates
//! the hitting time of +-1 for cross-validation of the quadratic scaling.
//!
//! Everything is deterministic given a master seed: replicate streams are
//! counter-based, and aggregation is order-independent, so results do not
//! depend on thread count.

// Parameter guards are written as negated comparisons (`!(x > 0.0)`) on
// purpose: they must reject NaN, which the un-negated forms would let through.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod couplings;
pub mod estimators;
pub mod exact;
pub mod exec;
pub mod limit;
pub mod report;
pub mod rng;
pub mod stats;
pub mod walks;

use thiserror::Error as ThisError;

#[derive(Debug, ThisError)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParam(String),

    #[error("numerical failure: {0}")]
    Numeric(String),

    #[error(
        "coupling invariant violated at step {step}: {what} (erw = {erw}, companion = {companion})"
    )]
    CouplingViolation {
        what: &'static str,
        step: u64,
        erw: i64,
        companion: i64,
    },

    #[error("{censored} of {replicates} replicates hit the horizon cap; raise the cap")]
    Censoring { censored: u64, replicates: u64 },

    #[error("curve fit failed: {0}")]
    CurveFit(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
