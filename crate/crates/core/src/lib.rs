//! Cascaded scalar Kalman filters with two information-sharing structures.
//!
//! A chain of m agents estimates a scalar AR(1) state. Agent 1 measures the
//! state directly; each later agent only receives its predecessor's
//! (post-processed, noise-corrupted) estimate and turns it back into an
//! equivalent direct measurement. The crate implements and analyzes two
//! ways the agents can choose their priors:
//!
//! * **private-prior** — every agent predicts from its own previous
//!   posterior; the stationary variances solve a cascade of independent
//!   scalar fixed-point problems ([`riccati::pp_cascade_fixed_points`]);
//! * **word-of-mouth** — every agent adopts the last agent's posterior as
//!   its prior; all agents share one stationary prediction variance, the
//!   root of a polynomial fixed-point equation
//!   ([`riccati::wom_fixed_point`]).
//!
//! Modules:
//!
//! * [`model`] — the AR(1) state model and seeded trajectory simulation;
//! * [`chain`] — the per-step filter recursions for both structures;
//! * [`riccati`] — stationary variances: closed forms, polynomial
//!   construction, bisection / iteration solvers, cross-checks;
//! * [`experiments`] — Monte Carlo error studies, convergence traces, and
//!   interval-coverage checks.

pub mod chain;
pub mod error;
pub mod experiments;
pub mod model;
pub mod riccati;

pub use chain::{
    init_chain, mean_update_identity_check, post_process, pre_process, predict, time_step,
    variance_correction, variance_prediction, AgentSlot, ChainState, PriorConvention, Setup,
    VarianceSweep,
};
pub use error::{Error, Result};
pub use experiments::{
    paired_comparison, run_convergence_trace, run_coverage, run_mse, AgentComparison, AgentMse,
    CoverageReport, ExperimentConfig, ExperimentReport, SetupReport, VarianceTrace,
};
pub use model::{simulate, ModelParams, Trajectory, MAX_AGENTS};
pub use riccati::{
    build_noise_polynomial, contraction_certificate, dare_closed_form, dare_iterate, dare_map,
    pp_cascade_fixed_points, wom_contraction_from, wom_fixed_point, wom_map, AgentStationary,
    DareProblem, FixedPointReport, NoisePolynomial, SolveMethod, WomMap, WomMethod,
};
