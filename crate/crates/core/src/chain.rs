//! Relay chains of scalar Kalman filters.
//!
//! m agents estimate the same AR(1) state. Agent 1 measures it directly:
//! y_k^1 = x_k + v_k^1. Agent i > 1 receives agent i-1's post-processed
//! posterior plus fresh injected noise and pre-processes it (divides by the
//! predecessor's gain) into an equivalent direct measurement
//! y_k^i = x_k + n_k^i. The equivalent noise variance grows along the chain:
//! r_k^i = r_k^{i-1} + s_i / (gain_k^{i-1})^2, starting from r_k^1 = s_1.
//!
//! Two information structures are supported:
//!
//! * private-prior (PP): each agent predicts from its own previous posterior;
//! * word-of-mouth (WoM): every agent predicts from agent m's previous
//!   posterior, so all agents share one prior per step, and the noise
//!   increments take the form gamma_k^i = s_i (1 + r_k^{i-1}/p_k)^2 with p_k
//!   the shared prediction variance.
//!
//! Gains and variances never depend on the realized data — only the means do.
//! [`variance_correction`] / [`variance_prediction`] expose that data-free
//! part on its own (used for convergence traces), and the time steps are
//! built on the same functions so the two paths cannot drift apart.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::model::ModelParams;

/// Information structure of the chain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Setup {
    /// Private-prior: agents keep their own priors.
    Pp,
    /// Word-of-mouth: all agents adopt agent m's posterior as their prior.
    Wom,
}

impl Setup {
    /// Short label used in reports and CSV output.
    pub fn label(self) -> &'static str {
        match self {
            Setup::Pp => "PP",
            Setup::Wom => "WoM",
        }
    }
}

impl fmt::Display for Setup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Setup {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "pp" => Ok(Setup::Pp),
            "wom" => Ok(Setup::Wom),
            other => Err(Error::InvalidParameter(format!(
                "setup must be pp or wom, got {other:?}"
            ))),
        }
    }
}

/// Where the initial belief sits relative to the first measurement.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PriorConvention {
    /// (x0, p0) is a posterior at time 0; the first step predicts from it.
    PosteriorAtZero,
    /// The prediction for time 1 is materialized immediately:
    /// pred_var = a^2 p0 + q, pred_mean = a x0.
    PredictionAtOne,
}

/// Per-agent filter quantities for one time step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AgentSlot {
    /// Prediction (prior) mean used by the current step.
    pub pred_mean: f64,
    /// Prediction (prior) variance used by the current step, > 0.
    pub pred_var: f64,
    /// Posterior mean after correction.
    pub post_mean: f64,
    /// Posterior variance after correction, > 0.
    pub post_var: f64,
    /// Correction gain in (0, 1); None until the first correction ran.
    pub gain: Option<f64>,
    /// Equivalent noise variance r_k^i; None until the first correction ran.
    pub eq_noise_var: Option<f64>,
    /// Equivalent-noise increment gamma_k^i over the predecessor; None for
    /// agent 1 (whose noise is s_1 outright) and before the first correction.
    pub gamma: Option<f64>,
    /// Equivalent observation consumed by the correction; None until then.
    pub obs: Option<f64>,
}

/// Chain state after `k` completed time steps.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainState {
    /// Number of completed time steps.
    pub k: usize,
    /// Information structure this state evolves under.
    pub setup: Setup,
    /// One slot per agent, in chain order.
    pub slots: Vec<AgentSlot>,
}

/// Initialize a chain. Every agent starts from the same prior belief
/// (prior_mean, prior_var).
///
/// The step functions always derive predictions from the stored posteriors,
/// so both conventions evolve identically; `PredictionAtOne` merely exposes
/// the first prediction in the `pred_*` fields right away. Initializing with
/// `PosteriorAtZero` and applying [`predict`] yields exactly the
/// `PredictionAtOne` state.
pub fn init_chain(params: &ModelParams, setup: Setup, convention: PriorConvention) -> ChainState {
    debug_assert!(params.validate().is_ok());
    let (pred_mean, pred_var) = match convention {
        PriorConvention::PosteriorAtZero => (params.prior_mean, params.prior_var),
        PriorConvention::PredictionAtOne => (
            params.a * params.prior_mean,
            params.a * params.a * params.prior_var + params.q,
        ),
    };
    let slot = AgentSlot {
        pred_mean,
        pred_var,
        post_mean: params.prior_mean,
        post_var: params.prior_var,
        gain: None,
        eq_noise_var: None,
        gamma: None,
        obs: None,
    };
    ChainState {
        k: 0,
        setup,
        slots: vec![slot; params.num_agents()],
    }
}

/// Fill the prediction fields from the stored posteriors without correcting:
/// PP per agent, WoM broadcast from agent m.
pub fn predict(params: &ModelParams, state: &ChainState) -> ChainState {
    let mut next = state.clone();
    match state.setup {
        Setup::Pp => {
            for slot in &mut next.slots {
                slot.pred_mean = params.a * slot.post_mean;
                slot.pred_var = params.a * params.a * slot.post_var + params.q;
            }
        }
        Setup::Wom => {
            let last = state.slots[state.slots.len() - 1];
            let pred_mean = params.a * last.post_mean;
            let pred_var = params.a * params.a * last.post_var + params.q;
            for slot in &mut next.slots {
                slot.pred_mean = pred_mean;
                slot.pred_var = pred_var;
            }
        }
    }
    next
}

/// Remove the prior contribution from a posterior before relaying it:
/// returns post_mean - (1 - gain) * pred_mean, which equals gain * y for the
/// observation y that produced the posterior.
pub fn post_process(post_mean: f64, pred_mean: f64, gain: f64) -> f64 {
    post_mean - (1.0 - gain) * pred_mean
}

/// Undo the relay scaling: divide the received signal by the predecessor's
/// gain, recovering an equivalent direct measurement of the state.
/// `agent` is the 1-based receiver index, used only in the error.
pub fn pre_process(received: f64, predecessor_gain: f64, agent: usize) -> Result<f64> {
    if predecessor_gain == 0.0 {
        return Err(Error::ZeroGain { agent });
    }
    Ok(received / predecessor_gain)
}

/// Data-free correction quantities for one step, all agents.
#[derive(Debug, Clone, PartialEq)]
pub struct VarianceSweep {
    /// Correction gains, one per agent, each in (0, 1).
    pub gains: Vec<f64>,
    /// Posterior variances.
    pub post_vars: Vec<f64>,
    /// Equivalent noise variances r^1..r^m (strictly increasing).
    pub eq_noise_vars: Vec<f64>,
    /// Noise increments; `gammas[0]` is None (agent 1 has no predecessor).
    pub gammas: Vec<Option<f64>>,
}

/// Run the correction sweep on prediction variances alone.
///
/// PP uses each agent's own `pred_vars[i]`; WoM uses the shared
/// `pred_vars[m-1]` in every gain denominator (in normal operation all
/// entries are equal anyway). Left to right: agent 1 corrects with r = s_1,
/// each later agent inflates the noise by its increment and corrects.
pub fn variance_correction(
    params: &ModelParams,
    setup: Setup,
    pred_vars: &[f64],
) -> Result<VarianceSweep> {
    let m = params.num_agents();
    if pred_vars.len() != m {
        return Err(Error::InvalidParameter(format!(
            "pred_vars has {} entries for {} agents",
            pred_vars.len(),
            m
        )));
    }

    let shared = pred_vars[m - 1];
    let mut gains = Vec::with_capacity(m);
    let mut post_vars = Vec::with_capacity(m);
    let mut eq_noise_vars = Vec::with_capacity(m);
    let mut gammas = Vec::with_capacity(m);

    let mut r = params.s[0];
    for i in 0..m {
        if i > 0 {
            let gamma = match setup {
                // r^i = r^{i-1} + s_i / gain^2
                Setup::Pp => params.s[i] / (gains[i - 1] * gains[i - 1]),
                // gamma^i = s_i (1 + r^{i-1} / p)^2 with the shared p
                Setup::Wom => {
                    let ratio = 1.0 + r / shared;
                    params.s[i] * ratio * ratio
                }
            };
            r += gamma;
            gammas.push(Some(gamma));
        } else {
            gammas.push(None);
        }
        let p = match setup {
            Setup::Pp => pred_vars[i],
            Setup::Wom => shared,
        };
        let gain = p / (p + r);
        if gain == 0.0 {
            return Err(Error::ZeroGain { agent: i + 1 });
        }
        gains.push(gain);
        post_vars.push(p * (1.0 - gain));
        eq_noise_vars.push(r);
    }

    Ok(VarianceSweep {
        gains,
        post_vars,
        eq_noise_vars,
        gammas,
    })
}

/// Map posterior variances to the next step's prediction variances:
/// PP per agent, WoM broadcast from agent m.
pub fn variance_prediction(params: &ModelParams, setup: Setup, post_vars: &[f64]) -> Vec<f64> {
    let a2 = params.a * params.a;
    match setup {
        Setup::Pp => post_vars.iter().map(|&p| a2 * p + params.q).collect(),
        Setup::Wom => {
            let shared = a2 * post_vars[post_vars.len() - 1] + params.q;
            vec![shared; post_vars.len()]
        }
    }
}

/// Advance a private-prior chain by one step on realized data.
pub fn pp_time_step(
    params: &ModelParams,
    state: &ChainState,
    x_true: f64,
    injected: &[f64],
) -> Result<ChainState> {
    if state.setup != Setup::Pp {
        return Err(Error::InvalidParameter(
            "pp_time_step applied to a non-PP chain state".to_string(),
        ));
    }
    step_impl(params, state, x_true, injected)
}

/// Advance a word-of-mouth chain by one step on realized data.
pub fn wom_time_step(
    params: &ModelParams,
    state: &ChainState,
    x_true: f64,
    injected: &[f64],
) -> Result<ChainState> {
    if state.setup != Setup::Wom {
        return Err(Error::InvalidParameter(
            "wom_time_step applied to a non-WoM chain state".to_string(),
        ));
    }
    step_impl(params, state, x_true, injected)
}

/// Advance a chain by one step, dispatching on its setup.
pub fn time_step(
    params: &ModelParams,
    state: &ChainState,
    x_true: f64,
    injected: &[f64],
) -> Result<ChainState> {
    step_impl(params, state, x_true, injected)
}

fn step_impl(
    params: &ModelParams,
    state: &ChainState,
    x_true: f64,
    injected: &[f64],
) -> Result<ChainState> {
    let m = params.num_agents();
    if state.slots.len() != m {
        return Err(Error::InvalidParameter(format!(
            "state has {} slots for {} agents",
            state.slots.len(),
            m
        )));
    }
    if injected.len() != m {
        return Err(Error::InvalidParameter(format!(
            "injected noise row has {} entries for {} agents",
            injected.len(),
            m
        )));
    }

    let predicted = predict(params, state);
    let pred_vars: Vec<f64> = predicted.slots.iter().map(|s| s.pred_var).collect();
    let sweep = variance_correction(params, state.setup, &pred_vars)?;

    let mut slots = Vec::with_capacity(m);
    for i in 0..m {
        let pred_mean = predicted.slots[i].pred_mean;
        let y = if i == 0 {
            x_true + injected[0]
        } else {
            let prev: &AgentSlot = &slots[i - 1];
            let relayed = post_process(prev.post_mean, prev.pred_mean, sweep.gains[i - 1]);
            pre_process(relayed + injected[i], sweep.gains[i - 1], i + 1)?
        };
        let gain = sweep.gains[i];
        let post_mean = pred_mean + gain * (y - pred_mean);
        slots.push(AgentSlot {
            pred_mean,
            pred_var: pred_vars[i],
            post_mean,
            post_var: sweep.post_vars[i],
            gain: Some(gain),
            eq_noise_var: Some(sweep.eq_noise_vars[i]),
            gamma: sweep.gammas[i],
            obs: Some(y),
        });
    }

    Ok(ChainState {
        k: state.k + 1,
        setup: state.setup,
        slots,
    })
}

/// Recompute pred_mean + gain * (y - pred_mean) from a corrected slot and
/// check it reproduces the stored posterior mean. Returns the recomputed
/// value; errors if the slot has not been corrected yet; panics if the
/// identity is violated beyond rounding — that means the update is broken,
/// not that the input is bad.
pub fn mean_update_identity_check(slot: &AgentSlot, y: f64) -> Result<f64> {
    let gain = slot.gain.ok_or_else(|| {
        Error::InvalidParameter("slot has no gain yet; run a correction step first".to_string())
    })?;
    let recomputed = slot.pred_mean + gain * (y - slot.pred_mean);
    let scale = slot.post_mean.abs().max(slot.pred_mean.abs()).max(1.0);
    assert!(
        (recomputed - slot.post_mean).abs() <= 16.0 * f64::EPSILON * scale,
        "mean update identity violated: recomputed {recomputed}, stored {}",
        slot.post_mean
    );
    Ok(recomputed)
}
