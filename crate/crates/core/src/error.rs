//! Error type shared across the crate.

use thiserror::Error;

/// Errors from validation, solvers, and experiment drivers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// A parameter failed validation; the message names the offending field.
    #[error("{0}")]
    InvalidParameter(String),

    /// A fixed-point iteration exhausted its iteration budget. Carries the
    /// last iterate and step size so the caller can report how close it got.
    #[error(
        "fixed-point iteration did not converge within {max_iter} iterations \
         (last iterate {last:e}, last step {step:e})"
    )]
    NoConvergence { last: f64, step: f64, max_iter: usize },

    /// The bisection bracket does not straddle a sign change. The root is
    /// guaranteed to lie inside the open bracket, so this signals a bug.
    #[error("bisection bracket [{lo:e}, {hi:e}] does not straddle a sign change")]
    BracketSign { lo: f64, hi: f64 },

    /// A relay gain of exactly zero cannot be inverted during pre-processing.
    /// Gains are strictly positive for valid parameters; this is defensive.
    #[error("agent {agent} has zero gain; relay pre-processing would divide by zero")]
    ZeroGain { agent: usize },

    /// Agent index outside 1..=m.
    #[error("agent index {index} out of range 1..={num_agents}")]
    AgentIndex { index: usize, num_agents: usize },

    /// The equivalent-noise polynomial for agent i has degree 2^i - 2; its
    /// construction is capped at i = 10.
    #[error("noise polynomial unsupported for agent {index}: degree 2^i - 2 exceeds the i = 10 cap")]
    PolynomialDegree { index: usize },

    /// A post-solve residual check failed; signals a bug, not bad input.
    #[error("{context}: residual {residual:e} exceeds bound {bound:e}")]
    ResidualCheck {
        context: &'static str,
        residual: f64,
        bound: f64,
    },
}

pub type Result<T> = std::result::Result<T, Error>;
