//! Scalar AR(1) state model and trajectory simulation.
//!
//! The latent state evolves as x_k = a·x_{k-1} + w_k with w_k ~ N(0, q) and
//! x_0 ~ N(prior_mean, prior_var). Agent i's injected measurement noise is
//! v_k^i ~ N(0, s_i); agent 1 measures the state directly, later agents
//! receive relayed signals (see `chain`).
//!
//! Reproducibility: all randomness comes from a ChaCha8 stream
//! (`rand_chacha::ChaCha8Rng`) seeded with a caller-provided 64-bit seed, and
//! Gaussians are produced by `rand_distr::StandardNormal` (ziggurat method).
//! The draw order is fixed — x_0 first, then per step k: w_k followed by
//! v_k^1..v_k^m — so a seed pins the whole trajectory bit for bit, and the
//! same trajectory can drive both chain setups on identical noise.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};

/// Maximum supported chain length. The equivalent-noise polynomial for agent
/// i has degree 2^i - 2, which gets out of hand quickly past this.
pub const MAX_AGENTS: usize = 10;

/// Parameters of the state model and the measurement chain.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    /// State transition coefficient, in (-1, 1).
    pub a: f64,
    /// Process noise variance, > 0.
    pub q: f64,
    /// Mean of the initial state distribution.
    pub prior_mean: f64,
    /// Variance of the initial state distribution, > 0.
    pub prior_var: f64,
    /// Injected noise variances s_1..s_m, one per agent, each > 0.
    pub s: Vec<f64>,
}

impl ModelParams {
    /// Validating constructor.
    pub fn new(a: f64, q: f64, prior_mean: f64, prior_var: f64, s: Vec<f64>) -> Result<Self> {
        let params = ModelParams {
            a,
            q,
            prior_mean,
            prior_var,
            s,
        };
        params.validate()?;
        Ok(params)
    }

    /// Number of agents m in the chain.
    pub fn num_agents(&self) -> usize {
        self.s.len()
    }

    /// Check every field; the error message names the offending field.
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidParameter(msg.to_string()));
        if !(self.a > -1.0 && self.a < 1.0) {
            return bad("a must lie in (-1,1)");
        }
        if !self.q.is_finite() {
            return bad("q must be finite");
        }
        if self.q <= 0.0 {
            return bad("q must be positive");
        }
        if !self.prior_mean.is_finite() {
            return bad("x0 (prior mean) must be finite");
        }
        if !self.prior_var.is_finite() {
            return bad("p0 (prior variance) must be finite");
        }
        if self.prior_var <= 0.0 {
            return bad("p0 (prior variance) must be positive");
        }
        if self.s.is_empty() {
            return bad("s must list at least one agent noise variance");
        }
        if self.s.len() > MAX_AGENTS {
            return Err(Error::InvalidParameter(format!(
                "s lists {} agents; at most {} are supported",
                self.s.len(),
                MAX_AGENTS
            )));
        }
        for (i, &si) in self.s.iter().enumerate() {
            if si <= 0.0 || !si.is_finite() {
                return Err(Error::InvalidParameter(format!(
                    "s_{} must be positive and finite",
                    i + 1
                )));
            }
        }
        Ok(())
    }
}

/// A realized state path together with every noise draw that produced it.
///
/// Index convention: `states[j]`, `process_noise[j]` and `injected_noise[j]`
/// all belong to time step k = j + 1; the realized x_0 sits in
/// `initial_state`. So `states[0] = a * initial_state + process_noise[0]` and
/// `states[j] = a * states[j-1] + process_noise[j]` hold exactly (the
/// recursion is how the states are produced).
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    /// Realized initial state x_0 ~ N(prior_mean, prior_var).
    pub initial_state: f64,
    /// States x_1..x_K.
    pub states: Vec<f64>,
    /// Process noise w_1..w_K.
    pub process_noise: Vec<f64>,
    /// Injected noise rows, one per step, each with one entry per agent.
    pub injected_noise: Vec<Vec<f64>>,
    /// Seed that produced the draws.
    pub seed: u64,
}

impl Trajectory {
    /// Number of time steps K.
    pub fn horizon(&self) -> usize {
        self.states.len()
    }
}

/// Draw a trajectory of `horizon` steps. Deterministic in `(params, horizon,
/// seed)`.
pub fn simulate(params: &ModelParams, horizon: usize, seed: u64) -> Result<Trajectory> {
    params.validate()?;
    if horizon == 0 {
        return Err(Error::InvalidParameter(
            "horizon must be at least 1".to_string(),
        ));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut gauss = move || -> f64 { StandardNormal.sample(&mut rng) };

    let initial_state = params.prior_mean + params.prior_var.sqrt() * gauss();
    let sqrt_q = params.q.sqrt();
    let sqrt_s: Vec<f64> = params.s.iter().map(|&si| si.sqrt()).collect();

    let mut states = Vec::with_capacity(horizon);
    let mut process_noise = Vec::with_capacity(horizon);
    let mut injected_noise = Vec::with_capacity(horizon);
    let mut x = initial_state;
    for _ in 0..horizon {
        let w = sqrt_q * gauss();
        x = params.a * x + w;
        states.push(x);
        process_noise.push(w);
        injected_noise.push(sqrt_s.iter().map(|&sd| sd * gauss()).collect());
    }

    Ok(Trajectory {
        initial_state,
        states,
        process_noise,
        injected_noise,
        seed,
    })
}
