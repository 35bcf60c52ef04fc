//! Stationary variances of the filter chains.
//!
//! For a scalar filter with state coefficient `a`, process noise `q`, and
//! measurement noise `r`, the stationary prediction variance solves
//! p = a^2 p r / (p + r) + q, i.e. the positive root of
//! p^2 + p (r (1 - a^2) - q) - q r = 0.
//!
//! Private-prior chains reduce to a cascade of such problems: solve agent 1
//! with r = s_1, inflate the noise by s_i / gain^2, solve again.
//!
//! Word-of-mouth chains share one prediction variance p. Expressing every
//! gain through p turns the equivalent noise of agent i into a polynomial
//! f_i(1/p) with positive coefficients (degree 2^i - 2), and the stationary
//! p of agent m solves p = T(p) with T(p) = a^2 p f(p) / (p + f(p)) + q.
//! Two independent routes are implemented — bisection on an algebraic
//! rearrangement over the bracket (q, q / (1 - a^2)), and direct iteration
//! of T — and cross-checked against each other. The per-agent quantities
//! reported for WoM come from a third route, the step-by-step noise
//! recursion in [`crate::chain`], so a bug in the polynomial construction
//! cannot silently agree with itself.

use std::fmt;

use crate::chain::{self, Setup};
use crate::error::{Error, Result};
use crate::model::{ModelParams, MAX_AGENTS};

/// One scalar stationary-variance problem.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DareProblem {
    /// State coefficient, |a| < 1.
    pub a: f64,
    /// Process noise variance, > 0.
    pub q: f64,
    /// Measurement noise variance, > 0.
    pub r: f64,
}

impl DareProblem {
    /// Validating constructor.
    pub fn new(a: f64, q: f64, r: f64) -> Result<Self> {
        if !(a.is_finite() && a.abs() < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "a must lie in (-1,1), got {a}"
            )));
        }
        if !(q.is_finite() && q > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "q must be positive and finite, got {q}"
            )));
        }
        if !(r.is_finite() && r > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "r must be positive and finite, got {r}"
            )));
        }
        Ok(Self { a, q, r })
    }
}

/// Positive root of p^2 + p (r (1 - a^2) - q) - q r = 0 in closed form.
///
/// Uses the branch that avoids subtracting nearly equal quantities: with
/// b = r (1 - a^2) - q and disc = sqrt(b^2 + 4 q r), the root is
/// 2 q r / (b + disc) when b > 0 and (disc - b) / 2 otherwise.
pub fn dare_closed_form(prob: &DareProblem) -> f64 {
    let DareProblem { a, q, r } = *prob;
    let b = r * (1.0 - a * a) - q;
    let disc = (b * b + 4.0 * q * r).sqrt();
    if b > 0.0 {
        2.0 * q * r / (b + disc)
    } else {
        (disc - b) / 2.0
    }
}

/// One application of the variance recursion: a^2 p r / (p + r) + q.
pub fn dare_map(prob: &DareProblem, p: f64) -> f64 {
    prob.a * prob.a * p * prob.r / (p + prob.r) + prob.q
}

/// Iterate the variance recursion from `p_init` until two successive
/// candidates agree within relative tolerance `tol`. Returns the converged
/// value and the number of map applications it took to certify it. Errors
/// with [`Error::NoConvergence`] past `max_iter`. Iterates stay >= q > 0, so
/// a relative criterion is meaningful at every scale.
pub fn dare_iterate(
    prob: &DareProblem,
    p_init: f64,
    tol: f64,
    max_iter: usize,
) -> Result<(f64, usize)> {
    if !(p_init.is_finite() && p_init > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "p_init must be positive and finite, got {p_init}"
        )));
    }
    let mut candidate = dare_map(prob, p_init);
    for n in 1..=max_iter {
        let next = dare_map(prob, candidate);
        if (next - candidate).abs() <= tol * candidate.abs() {
            return Ok((candidate, n));
        }
        candidate = next;
    }
    Err(Error::NoConvergence {
        last: candidate,
        step: (dare_map(prob, candidate) - candidate).abs(),
        max_iter,
    })
}

/// Stationary quantities of one agent.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AgentStationary {
    /// 1-based agent index.
    pub agent: usize,
    /// Stationary prediction variance p_inf.
    pub pred_var: f64,
    /// Stationary gain.
    pub gain: f64,
    /// Stationary equivalent noise variance r_inf.
    pub eq_noise_var: f64,
    /// Stationary posterior variance p_inf (1 - gain).
    pub post_var: f64,
}

/// How a fixed-point report was produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveMethod {
    /// Cascade of closed-form scalar solutions (private-prior).
    PpClosedForm,
    /// Bisection on the algebraic rearrangement (word-of-mouth).
    WomBisection,
    /// Direct iteration of the variance map (word-of-mouth).
    WomIteration,
}

impl fmt::Display for SolveMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            SolveMethod::PpClosedForm => "closed-form cascade",
            SolveMethod::WomBisection => "bisection",
            SolveMethod::WomIteration => "iteration",
        };
        f.write_str(s)
    }
}

/// Stationary variances for a whole chain.
#[derive(Debug, Clone, PartialEq)]
pub struct FixedPointReport {
    /// Information structure the report describes.
    pub setup: Setup,
    /// Per-agent stationary quantities, in chain order.
    pub agents: Vec<AgentStationary>,
    /// How the solution was produced.
    pub method: SolveMethod,
    /// Iterations / bisection steps consumed (0 for pure closed form).
    pub iterations: usize,
    /// Largest relative residual |map(p) - p| / p over the agents.
    pub max_rel_residual: f64,
}

/// Solve the private-prior cascade: agent 1 with r = s_1 in closed form,
/// then r_{i} = r_{i-1} + s_i / gain_{i-1}^2 and solve again.
pub fn pp_cascade_fixed_points(params: &ModelParams) -> Result<FixedPointReport> {
    params.validate()?;
    let mut agents: Vec<AgentStationary> = Vec::with_capacity(params.num_agents());
    let mut r = params.s[0];
    let mut max_rel_residual: f64 = 0.0;
    for i in 0..params.num_agents() {
        if i > 0 {
            let prev_gain = agents[i - 1].gain;
            r += params.s[i] / (prev_gain * prev_gain);
        }
        let prob = DareProblem::new(params.a, params.q, r)?;
        let p = dare_closed_form(&prob);
        let residual = (dare_map(&prob, p) - p).abs() / p;
        max_rel_residual = max_rel_residual.max(residual);
        let gain = p / (p + r);
        agents.push(AgentStationary {
            agent: i + 1,
            pred_var: p,
            gain,
            eq_noise_var: r,
            post_var: p * (1.0 - gain),
        });
    }
    if max_rel_residual >= 1e-10 {
        return Err(Error::ResidualCheck {
            context: "private-prior cascade fixed points",
            residual: max_rel_residual,
            bound: 1e-10,
        });
    }
    Ok(FixedPointReport {
        setup: Setup::Pp,
        agents,
        method: SolveMethod::PpClosedForm,
        iterations: 0,
        max_rel_residual,
    })
}

/// Equivalent noise of a word-of-mouth agent as a polynomial in u = 1/p:
/// f_i(p) = sum_j coeffs[j] u^j. All coefficients are nonnegative, so
/// Horner evaluation never cancels.
#[derive(Debug, Clone, PartialEq)]
pub struct NoisePolynomial {
    /// 1-based index of the agent whose equivalent noise this is.
    pub agent_index: usize,
    /// Coefficients in increasing powers of u = 1/p; coeffs[0] is the
    /// constant term.
    pub coeffs: Vec<f64>,
}

impl NoisePolynomial {
    /// Polynomial degree in u (2^i - 2 for agent i).
    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    /// Evaluate at prediction variance `p` via Horner in u = 1/p.
    pub fn eval(&self, p: f64) -> f64 {
        let u = 1.0 / p;
        let mut acc = 0.0;
        for &c in self.coeffs.iter().rev() {
            acc = acc * u + c;
        }
        acc
    }
}

fn convolve(x: &[f64], y: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; x.len() + y.len() - 1];
    for (i, &xi) in x.iter().enumerate() {
        for (j, &yj) in y.iter().enumerate() {
            out[i + j] += xi * yj;
        }
    }
    out
}

/// Build the equivalent-noise polynomial of word-of-mouth agent
/// `agent_index` (1-based, >= 2): starting from f_1 = s_1, each stage adds
/// gamma_j(p) = s_j (1 + f_{j-1}(p) / p)^2, which in u = 1/p is the
/// coefficient convolution s_j * (1 + u f_{j-1}) * (1 + u f_{j-1}).
pub fn build_noise_polynomial(params: &ModelParams, agent_index: usize) -> Result<NoisePolynomial> {
    params.validate()?;
    if agent_index < 2 {
        return Err(Error::AgentIndex {
            index: agent_index,
            num_agents: params.num_agents(),
        });
    }
    if agent_index > MAX_AGENTS {
        return Err(Error::PolynomialDegree { index: agent_index });
    }
    if agent_index > params.num_agents() {
        return Err(Error::AgentIndex {
            index: agent_index,
            num_agents: params.num_agents(),
        });
    }

    // acc holds the coefficients of f_j in increasing powers of u.
    let mut acc = vec![params.s[0]];
    for j in 2..=agent_index {
        // 1 + u f_{j-1}: prepend the constant 1, shifting f up one power.
        let mut inner = Vec::with_capacity(acc.len() + 1);
        inner.push(1.0);
        inner.extend_from_slice(&acc);
        let square = convolve(&inner, &inner);
        let gamma: Vec<f64> = square.iter().map(|c| params.s[j - 1] * c).collect();
        if acc.len() < gamma.len() {
            acc.resize(gamma.len(), 0.0);
        }
        for (a, g) in acc.iter_mut().zip(&gamma) {
            *a += g;
        }
        if acc.iter().any(|c| !c.is_finite()) {
            return Err(Error::PolynomialDegree { index: agent_index });
        }
    }
    debug_assert_eq!(acc.len(), (1usize << agent_index) - 1);
    Ok(NoisePolynomial {
        agent_index,
        coeffs: acc,
    })
}

/// Equivalent noise of word-of-mouth agent m at shared prediction
/// variance p: a constant s_1 for m = 1, else the noise polynomial.
#[derive(Debug, Clone, PartialEq)]
pub enum WomMap {
    /// Single agent: the noise is s_1 regardless of p.
    Constant(f64),
    /// Multiple agents: polynomial in 1/p.
    Poly(NoisePolynomial),
}

impl WomMap {
    /// Build the map for agent m of `params`.
    pub fn build(params: &ModelParams) -> Result<Self> {
        params.validate()?;
        if params.num_agents() == 1 {
            Ok(WomMap::Constant(params.s[0]))
        } else {
            Ok(WomMap::Poly(build_noise_polynomial(
                params,
                params.num_agents(),
            )?))
        }
    }

    /// Equivalent noise f(p) of agent m.
    pub fn noise_at(&self, p: f64) -> f64 {
        match self {
            WomMap::Constant(s1) => *s1,
            WomMap::Poly(poly) => poly.eval(p),
        }
    }

    /// One application of the shared variance map
    /// T(p) = a^2 p f(p) / (p + f(p)) + q.
    pub fn apply(&self, params: &ModelParams, p: f64) -> f64 {
        let f = self.noise_at(p);
        params.a * params.a * p * f / (p + f) + params.q
    }
}

/// One application of the word-of-mouth variance map at `p`.
pub fn wom_map(p: f64, params: &ModelParams) -> Result<f64> {
    if !(p.is_finite() && p > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "p must be positive and finite, got {p}"
        )));
    }
    let map = WomMap::build(params)?;
    Ok(map.apply(params, p))
}

/// Root-finding strategy for the word-of-mouth fixed point.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WomMethod {
    /// Bisection on f(p) - g(p) over the bracket (q, q / (1 - a^2)), where
    /// g(p) = p (q - p) / (p (1 - a^2) - q) is the noise level that would
    /// make p exactly stationary.
    BisectionOnFg,
    /// Direct iteration of the shared variance map from the bracket
    /// midpoint.
    ContractionIteration,
}

const WOM_MAX_ITER: usize = 1_000_000;

/// Iterate the shared word-of-mouth variance map from `p_init` until two
/// successive values agree within relative tolerance `tol` (iterates stay
/// >= q > 0, so relative agreement is meaningful at every scale).
pub fn wom_contraction_from(
    params: &ModelParams,
    p_init: f64,
    tol: f64,
) -> Result<(f64, usize)> {
    if !(p_init.is_finite() && p_init > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "p_init must be positive and finite, got {p_init}"
        )));
    }
    let map = WomMap::build(params)?;
    let mut candidate = map.apply(params, p_init);
    for n in 1..=WOM_MAX_ITER {
        let next = map.apply(params, candidate);
        if (next - candidate).abs() <= tol * candidate.abs() {
            return Ok((candidate, n));
        }
        candidate = next;
    }
    Err(Error::NoConvergence {
        last: candidate,
        step: (map.apply(params, candidate) - candidate).abs(),
        max_iter: WOM_MAX_ITER,
    })
}

/// Solve the word-of-mouth fixed point with the requested method, then
/// cross-check: iteration results are compared against an independent
/// bisection solve, and every report is validated against the step-by-step
/// noise recursion from [`crate::chain`] plus a residual bound on the map.
pub fn wom_fixed_point(
    params: &ModelParams,
    method: WomMethod,
    tol: f64,
) -> Result<FixedPointReport> {
    params.validate()?;
    if !(tol.is_finite() && tol > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "tol must be positive and finite, got {tol}"
        )));
    }

    // Static state (a = 0): the map is constantly q, no search needed.
    if params.a == 0.0 {
        return finish_wom_report(params, params.q, SolveMethod::WomBisection, 0);
    }

    let (p, solve_method, iterations) = match method {
        WomMethod::BisectionOnFg => {
            let (p, steps) = wom_bisection(params, tol)?;
            (p, SolveMethod::WomBisection, steps)
        }
        WomMethod::ContractionIteration => {
            let a2 = params.a * params.a;
            let mid = 0.5 * (params.q + params.q / (1.0 - a2));
            let (p, steps) = wom_contraction_from(params, mid, tol)?;
            if params.num_agents() >= 3 {
                // The map is only locally contractive for longer chains;
                // insist the two routes land on the same point.
                let (p_bis, _) = wom_bisection(params, tol)?;
                let diff = (p - p_bis).abs() / p_bis.max(1.0);
                if diff > 1e-9 {
                    return Err(Error::ResidualCheck {
                        context: "wom iteration vs bisection",
                        residual: diff,
                        bound: 1e-9,
                    });
                }
            }
            (p, SolveMethod::WomIteration, steps)
        }
    };
    finish_wom_report(params, p, solve_method, iterations)
}

/// Bisection on phi(p) = f(p) - g(p), where g(p) = p (q - p) / (p (1-a^2) - q)
/// is the exact noise level that would make p stationary. Just above q the
/// noise f dominates (g -> 0), so phi > 0; just below the pole q / (1 - a^2)
/// g blows up, so phi < 0. The fixed point is the sign change in between.
fn wom_bisection(params: &ModelParams, tol: f64) -> Result<(f64, usize)> {
    let a2 = params.a * params.a;
    let map = WomMap::build(params)?;
    let g = |p: f64| p * (params.q - p) / (p * (1.0 - a2) - params.q);
    let phi = |p: f64| map.noise_at(p) - g(p);

    let lo_limit = params.q;
    let hi_limit = params.q / (1.0 - a2);
    let width = hi_limit - lo_limit;

    // Endpoints sit on singularities of g (p = q gives g = 0 exactly, the
    // other end is a pole), so start a hair inside and widen the margin if
    // rounding flips a sign.
    let mut lo = f64::NAN;
    let mut hi = f64::NAN;
    let mut found = false;
    let mut margin = 1e-15;
    while margin <= 1e-8 {
        let cand_lo = lo_limit + margin * width;
        let cand_hi = hi_limit - margin * width;
        if phi(cand_lo) > 0.0 && phi(cand_hi) < 0.0 {
            lo = cand_lo;
            hi = cand_hi;
            found = true;
            break;
        }
        margin *= 10.0;
    }
    if !found {
        return Err(Error::BracketSign {
            lo: lo_limit,
            hi: hi_limit,
        });
    }

    let mut steps = 0usize;
    // lo >= q > 0 throughout, so this is a relative width criterion.
    while hi - lo > tol * lo {
        let mid = 0.5 * (lo + hi);
        if !(mid > lo && mid < hi) {
            break; // interval collapsed to adjacent floats
        }
        if phi(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        steps += 1;
        if steps > 10_000 {
            return Err(Error::NoConvergence {
                last: mid,
                step: hi - lo,
                max_iter: 10_000,
            });
        }
    }
    Ok((0.5 * (lo + hi), steps))
}

/// Assemble the per-agent report at shared prediction variance `p`,
/// deriving gains and noises from the chain recursion (an independent
/// route from the polynomial) and enforcing the map residual bound.
fn finish_wom_report(
    params: &ModelParams,
    p: f64,
    method: SolveMethod,
    iterations: usize,
) -> Result<FixedPointReport> {
    let m = params.num_agents();
    let sweep = chain::variance_correction(params, Setup::Wom, &vec![p; m])?;

    // Residual of the shared map at p; for a = 0 the map is exactly q.
    let map = WomMap::build(params)?;
    let residual = (map.apply(params, p) - p).abs() / p;
    if residual >= 1e-10 {
        return Err(Error::ResidualCheck {
            context: "word-of-mouth fixed point",
            residual,
            bound: 1e-10,
        });
    }
    // The polynomial route and the recursion route must agree on the
    // equivalent noise of agent m.
    let rec_noise = sweep.eq_noise_vars[m - 1];
    let poly_noise = map.noise_at(p);
    let noise_diff = (rec_noise - poly_noise).abs() / rec_noise.max(1.0);
    if noise_diff >= 1e-10 {
        return Err(Error::ResidualCheck {
            context: "wom polynomial vs recursion noise",
            residual: noise_diff,
            bound: 1e-10,
        });
    }

    let agents = (0..m)
        .map(|i| AgentStationary {
            agent: i + 1,
            pred_var: p,
            gain: sweep.gains[i],
            eq_noise_var: sweep.eq_noise_vars[i],
            post_var: sweep.post_vars[i],
        })
        .collect();
    Ok(FixedPointReport {
        setup: Setup::Wom,
        agents,
        method,
        iterations,
        max_rel_residual: residual,
    })
}

/// Empirically bound the contraction factor of the shared word-of-mouth
/// variance map: sample `samples` random pairs of points p in
/// [1e-3, 1e3] (log-uniform) and return the largest observed ratio
/// |T(p1) - T(p2)| / |p1 - p2|.
pub fn contraction_certificate(params: &ModelParams, samples: usize, seed: u64) -> Result<f64> {
    use rand::{Rng, SeedableRng};

    params.validate()?;
    if samples == 0 {
        return Err(Error::InvalidParameter(
            "samples must be at least 1".to_string(),
        ));
    }
    let map = WomMap::build(params)?;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut max_ratio: f64 = 0.0;
    for _ in 0..samples {
        let p1 = 10f64.powf(rng.gen_range(-3.0..3.0));
        let p2 = 10f64.powf(rng.gen_range(-3.0..3.0));
        if p1 == p2 {
            continue;
        }
        let ratio = (map.apply(params, p1) - map.apply(params, p2)).abs() / (p1 - p2).abs();
        max_ratio = max_ratio.max(ratio);
    }
    Ok(max_ratio)
}
