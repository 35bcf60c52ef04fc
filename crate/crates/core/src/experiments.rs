//! Monte Carlo experiments and deterministic convergence traces.
//!
//! The drivers here answer three questions about a chain configuration:
//!
//! * [`run_mse`] — how large are the realized squared estimation errors,
//!   per agent and setup, compared with the claimed filter variances?
//!   Every setup is driven on the *same* simulated trajectories (paired
//!   noise), so cross-setup differences are not noise artifacts of
//!   mismatched randomness.
//! * [`run_convergence_trace`] — how do the data-free variance recursions
//!   approach their stationary points from chosen initial variances?
//! * [`run_coverage`] / the coverage fields — do the claimed posterior
//!   variances calibrate the realized errors (1-sigma and 3-sigma interval
//!   coverage)?
//!
//! Per-seed results are kept alongside the aggregates so standard errors
//! are honest (computed across independent seeds, not across correlated
//! time samples).

use crate::chain::{self, PriorConvention, Setup};
use crate::error::{Error, Result};
use crate::model::{simulate, ModelParams, Trajectory};
use crate::riccati::{self, FixedPointReport, WomMethod};

/// Full specification of an experiment run.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    /// Model and chain parameters.
    pub params: ModelParams,
    /// Steps per trajectory.
    pub horizon: usize,
    /// Seeds, one independent trajectory each. Must be distinct.
    pub seeds: Vec<u64>,
    /// Initial prediction variances for convergence traces (one trace per
    /// entry). Unused by the Monte Carlo drivers.
    pub initial_pred_vars: Vec<f64>,
    /// Which information structures to run.
    pub setups: Vec<Setup>,
    /// Steps dropped from the start of each trajectory before accumulating
    /// errors, to let the transient die out. Must be < horizon.
    pub burn_in: usize,
}

impl ExperimentConfig {
    /// Check the configuration is runnable.
    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        if self.horizon == 0 {
            return Err(Error::InvalidParameter(
                "horizon must be at least 1".to_string(),
            ));
        }
        if self.burn_in >= self.horizon {
            return Err(Error::InvalidParameter(format!(
                "burn-in {} leaves no samples at horizon {}",
                self.burn_in, self.horizon
            )));
        }
        if self.seeds.is_empty() {
            return Err(Error::InvalidParameter(
                "at least one seed is required".to_string(),
            ));
        }
        let mut sorted = self.seeds.clone();
        sorted.sort_unstable();
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidParameter(
                "seeds must be distinct".to_string(),
            ));
        }
        if self.setups.is_empty() {
            return Err(Error::InvalidParameter(
                "at least one setup is required".to_string(),
            ));
        }
        for (i, &p) in self.initial_pred_vars.iter().enumerate() {
            if !(p.is_finite() && p > 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "initial prediction variance #{} must be positive and finite, got {p}",
                    i + 1
                )));
            }
        }
        Ok(())
    }
}

/// Time-averaged squared errors of one agent on one trajectory.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeedMse {
    /// Seed of the trajectory.
    pub seed: u64,
    /// Mean squared prediction error past burn-in.
    pub mse_pred: f64,
    /// Mean squared posterior error past burn-in.
    pub mse_post: f64,
}

/// Monte Carlo error summary of one agent.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentMse {
    /// 1-based agent index.
    pub agent: usize,
    /// Mean over seeds of the per-seed prediction MSEs.
    pub mse_pred: f64,
    /// Mean over seeds of the per-seed posterior MSEs.
    pub mse_post: f64,
    /// Standard error of `mse_pred` across seeds.
    pub stderr_pred: f64,
    /// Standard error of `mse_post` across seeds.
    pub stderr_post: f64,
    /// The per-seed values behind the aggregates.
    pub per_seed: Vec<SeedMse>,
}

/// Monte Carlo results for one information structure.
#[derive(Debug, Clone, PartialEq)]
pub struct SetupReport {
    /// Information structure.
    pub setup: Setup,
    /// Per-agent error summaries, in chain order.
    pub agents: Vec<AgentMse>,
    /// Fraction of post-burn-in samples with the state inside three claimed
    /// standard deviations of the one-step-ahead prediction, per agent
    /// (pooled over seeds and time).
    pub coverage_3sigma: Vec<f64>,
    /// Stationary variances predicted by the fixed-point analysis.
    pub fixed_points: FixedPointReport,
}

/// Results of a full Monte Carlo run.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentReport {
    /// The configuration that produced the report.
    pub config: ExperimentConfig,
    /// One entry per requested setup, in request order.
    pub setups: Vec<SetupReport>,
}

fn mean_and_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    let mean = xs.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

fn fixed_points_for(params: &ModelParams, setup: Setup) -> Result<FixedPointReport> {
    match setup {
        Setup::Pp => riccati::pp_cascade_fixed_points(params),
        Setup::Wom => riccati::wom_fixed_point(params, WomMethod::BisectionOnFg, 1e-12),
    }
}

/// Per-(setup, agent) accumulation across one trajectory.
struct RunTally {
    sum_pred_sq: f64,
    sum_post_sq: f64,
    inside_1: usize,
    inside_3: usize,
}

/// Drive one setup along a trajectory, tallying squared errors and interval
/// hits for every agent past the burn-in. Interval coverage is one-step-
/// ahead: the state is compared against the prediction mean, scaled by the
/// claimed prediction standard deviation.
fn drive_chain(
    params: &ModelParams,
    setup: Setup,
    traj: &Trajectory,
    burn_in: usize,
) -> Result<Vec<RunTally>> {
    let m = params.num_agents();
    let mut tallies: Vec<RunTally> = (0..m)
        .map(|_| RunTally {
            sum_pred_sq: 0.0,
            sum_post_sq: 0.0,
            inside_1: 0,
            inside_3: 0,
        })
        .collect();
    let mut state = chain::init_chain(params, setup, PriorConvention::PosteriorAtZero);
    for k in 0..traj.horizon() {
        let x = traj.states[k];
        state = chain::time_step(params, &state, x, &traj.injected_noise[k])?;
        if state.k <= burn_in {
            continue;
        }
        for (i, slot) in state.slots.iter().enumerate() {
            let e_pred = slot.pred_mean - x;
            let e_post = slot.post_mean - x;
            tallies[i].sum_pred_sq += e_pred * e_pred;
            tallies[i].sum_post_sq += e_post * e_post;
            let sd = slot.pred_var.sqrt();
            if e_pred.abs() <= sd {
                tallies[i].inside_1 += 1;
            }
            if e_pred.abs() <= 3.0 * sd {
                tallies[i].inside_3 += 1;
            }
        }
    }
    Ok(tallies)
}

/// Run the Monte Carlo error experiment described by `config`.
pub fn run_mse(config: &ExperimentConfig) -> Result<ExperimentReport> {
    config.validate()?;
    let params = &config.params;
    let m = params.num_agents();
    let n_seeds = config.seeds.len();
    let n_steps = (config.horizon - config.burn_in) as f64;

    // per_seed[setup][agent][seed], inside_3[setup][agent]
    let mut per_seed: Vec<Vec<Vec<SeedMse>>> =
        vec![vec![Vec::with_capacity(n_seeds); m]; config.setups.len()];
    let mut inside_3: Vec<Vec<usize>> = vec![vec![0; m]; config.setups.len()];

    for &seed in &config.seeds {
        let traj = simulate(params, config.horizon, seed)?;
        for (si, &setup) in config.setups.iter().enumerate() {
            let tallies = drive_chain(params, setup, &traj, config.burn_in)?;
            for (ai, tally) in tallies.iter().enumerate() {
                per_seed[si][ai].push(SeedMse {
                    seed,
                    mse_pred: tally.sum_pred_sq / n_steps,
                    mse_post: tally.sum_post_sq / n_steps,
                });
                inside_3[si][ai] += tally.inside_3;
            }
        }
    }

    let total_samples = (n_seeds as f64) * n_steps;
    let mut setups = Vec::with_capacity(config.setups.len());
    for (si, &setup) in config.setups.iter().enumerate() {
        let mut agents = Vec::with_capacity(m);
        for (ai, seeds) in per_seed[si].iter().enumerate() {
            let preds: Vec<f64> = seeds.iter().map(|s| s.mse_pred).collect();
            let posts: Vec<f64> = seeds.iter().map(|s| s.mse_post).collect();
            let (mse_pred, stderr_pred) = mean_and_stderr(&preds);
            let (mse_post, stderr_post) = mean_and_stderr(&posts);
            agents.push(AgentMse {
                agent: ai + 1,
                mse_pred,
                mse_post,
                stderr_pred,
                stderr_post,
                per_seed: seeds.clone(),
            });
        }
        let coverage_3sigma = inside_3[si]
            .iter()
            .map(|&c| c as f64 / total_samples)
            .collect();
        setups.push(SetupReport {
            setup,
            agents,
            coverage_3sigma,
            fixed_points: fixed_points_for(params, setup)?,
        });
    }

    Ok(ExperimentReport {
        config: config.clone(),
        setups,
    })
}

/// Data-free variance history of one agent.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentVarianceTrace {
    /// 1-based agent index.
    pub agent: usize,
    /// Prediction variance entering each step's correction.
    pub pred_vars: Vec<f64>,
    /// Gain used at each step.
    pub gains: Vec<f64>,
    /// Posterior variance after each step.
    pub post_vars: Vec<f64>,
}

/// Variance recursion history from one initial prediction variance.
#[derive(Debug, Clone, PartialEq)]
pub struct VarianceTrace {
    /// Information structure traced.
    pub setup: Setup,
    /// Index of the initial variance in `config.initial_pred_vars`.
    pub init_id: usize,
    /// The initial prediction variance every agent started from.
    pub initial_pred_var: f64,
    /// Per-agent histories, each `config.horizon` entries long.
    pub agents: Vec<AgentVarianceTrace>,
}

/// Trace the variance recursions for every (setup, initial variance) pair.
/// No data is involved: this exercises exactly the recursion whose fixed
/// points the stationary analysis solves for.
pub fn run_convergence_trace(config: &ExperimentConfig) -> Result<Vec<VarianceTrace>> {
    config.validate()?;
    if config.initial_pred_vars.is_empty() {
        return Err(Error::InvalidParameter(
            "at least one initial prediction variance is required for a trace".to_string(),
        ));
    }
    let params = &config.params;
    let m = params.num_agents();
    let mut traces = Vec::new();
    for &setup in &config.setups {
        for (init_id, &init) in config.initial_pred_vars.iter().enumerate() {
            let mut agents: Vec<AgentVarianceTrace> = (1..=m)
                .map(|agent| AgentVarianceTrace {
                    agent,
                    pred_vars: Vec::with_capacity(config.horizon),
                    gains: Vec::with_capacity(config.horizon),
                    post_vars: Vec::with_capacity(config.horizon),
                })
                .collect();
            let mut pred_vars = vec![init; m];
            for _ in 0..config.horizon {
                let sweep = chain::variance_correction(params, setup, &pred_vars)?;
                for i in 0..m {
                    agents[i].pred_vars.push(pred_vars[i]);
                    agents[i].gains.push(sweep.gains[i]);
                    agents[i].post_vars.push(sweep.post_vars[i]);
                }
                pred_vars = chain::variance_prediction(params, setup, &sweep.post_vars);
            }
            traces.push(VarianceTrace {
                setup,
                init_id,
                initial_pred_var: init,
                agents,
            });
        }
    }
    Ok(traces)
}

/// One-step-ahead interval coverage of one agent on one trajectory.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeedCoverage {
    /// Seed of the trajectory.
    pub seed: u64,
    /// Fraction of samples with the state within one claimed standard
    /// deviation of the prediction.
    pub one_sigma: f64,
    /// Fraction within three claimed standard deviations.
    pub three_sigma: f64,
}

/// Interval coverage summary for one (setup, agent) pair.
#[derive(Debug, Clone, PartialEq)]
pub struct CoverageReport {
    /// Information structure.
    pub setup: Setup,
    /// 1-based agent index the intervals belong to.
    pub agent: usize,
    /// Mean over seeds of the per-seed one-sigma coverages.
    pub one_sigma: f64,
    /// Mean over seeds of the per-seed three-sigma coverages.
    pub three_sigma: f64,
    /// The per-seed values behind the aggregates.
    pub per_seed: Vec<SeedCoverage>,
}

/// Measure how well the claimed prediction variances calibrate the realized
/// one-step-ahead errors of `agent` (1-based): the fraction of post-burn-in
/// steps where the state lies within 1 and 3 claimed standard deviations of
/// the agent's prediction.
pub fn run_coverage(config: &ExperimentConfig, agent: usize) -> Result<Vec<CoverageReport>> {
    config.validate()?;
    let params = &config.params;
    let m = params.num_agents();
    if agent == 0 || agent > m {
        return Err(Error::AgentIndex {
            index: agent,
            num_agents: m,
        });
    }
    let n_steps = (config.horizon - config.burn_in) as f64;
    let mut reports = Vec::with_capacity(config.setups.len());
    for &setup in &config.setups {
        let mut per_seed = Vec::with_capacity(config.seeds.len());
        for &seed in &config.seeds {
            let traj = simulate(params, config.horizon, seed)?;
            let tallies = drive_chain(params, setup, &traj, config.burn_in)?;
            let tally = &tallies[agent - 1];
            per_seed.push(SeedCoverage {
                seed,
                one_sigma: tally.inside_1 as f64 / n_steps,
                three_sigma: tally.inside_3 as f64 / n_steps,
            });
        }
        let (one_sigma, _) = mean_and_stderr(
            &per_seed.iter().map(|s| s.one_sigma).collect::<Vec<_>>(),
        );
        let (three_sigma, _) = mean_and_stderr(
            &per_seed.iter().map(|s| s.three_sigma).collect::<Vec<_>>(),
        );
        reports.push(CoverageReport {
            setup,
            agent,
            one_sigma,
            three_sigma,
            per_seed,
        });
    }
    Ok(reports)
}

/// Paired Monte Carlo errors of one agent under both information
/// structures, from identical trajectories.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AgentComparison {
    /// 1-based agent index.
    pub agent: usize,
    /// Private-prior mean squared prediction error.
    pub pp_mse_pred: f64,
    /// Word-of-mouth mean squared prediction error.
    pub wom_mse_pred: f64,
    /// Private-prior mean squared posterior error.
    pub pp_mse_post: f64,
    /// Word-of-mouth mean squared posterior error.
    pub wom_mse_post: f64,
}

impl AgentComparison {
    /// Did sharing agent m's posterior reduce this agent's posterior MSE?
    pub fn wom_improves_post(&self) -> bool {
        self.wom_mse_post < self.pp_mse_post
    }

    /// Did sharing agent m's posterior reduce this agent's prediction MSE?
    pub fn wom_improves_pred(&self) -> bool {
        self.wom_mse_pred < self.pp_mse_pred
    }
}

/// Run both information structures on identical trajectories and compare
/// them agent by agent. `config.setups` is ignored: the comparison always
/// covers both.
pub fn paired_comparison(config: &ExperimentConfig) -> Result<Vec<AgentComparison>> {
    let mut both = config.clone();
    both.setups = vec![Setup::Pp, Setup::Wom];
    let report = run_mse(&both)?;
    let pp = &report.setups[0];
    let wom = &report.setups[1];
    Ok((0..config.params.num_agents())
        .map(|i| AgentComparison {
            agent: i + 1,
            pp_mse_pred: pp.agents[i].mse_pred,
            wom_mse_pred: wom.agents[i].mse_pred,
            pp_mse_post: pp.agents[i].mse_post,
            wom_mse_post: wom.agents[i].mse_post,
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    const PP_P_INF: [f64; 3] = [1.5483491580071511, 2.271_297_746_808_919, 3.243362013461293];
    const PP_POST_INF: [f64; 3] = [0.6075890947447658, 1.408_640_162_669_162, 2.485_719_682_505_588];
    const WOM_P_INF: f64 = 2.7967807071949644;

    fn iv_a_params() -> ModelParams {
        ModelParams::new(0.95, 1.0, 25.0, 3.0, vec![1.0, 1.0, 1.0]).unwrap()
    }

    fn iv_a_config(horizon: usize, n_seeds: u64, burn_in: usize) -> ExperimentConfig {
        ExperimentConfig {
            params: iv_a_params(),
            horizon,
            seeds: (0..n_seeds).collect(),
            initial_pred_vars: vec![0.1, 3.7075, 50.0],
            setups: vec![Setup::Pp, Setup::Wom],
            burn_in,
        }
    }

    #[test]
    fn validation_rejects_broken_configs() {
        let good = iv_a_config(100, 3, 10);
        assert!(good.validate().is_ok());

        let mut c = good.clone();
        c.horizon = 0;
        assert!(c.validate().is_err());

        let mut c = good.clone();
        c.burn_in = 100;
        assert!(c.validate().is_err());

        let mut c = good.clone();
        c.seeds = vec![];
        assert!(c.validate().is_err());

        let mut c = good.clone();
        c.seeds = vec![1, 2, 1];
        assert!(c.validate().is_err());

        let mut c = good.clone();
        c.setups = vec![];
        assert!(c.validate().is_err());

        let mut c = good.clone();
        c.initial_pred_vars = vec![1.0, -2.0];
        assert!(c.validate().is_err());
    }

    #[test]
    fn noise_free_chains_track_exactly() {
        // With vanishing process, measurement, and relay noise every agent
        // locks onto the (nearly frozen) state.
        let params =
            ModelParams::new(0.95, 1e-12, 0.0, 1e-12, vec![1e-12, 1e-12, 1e-12]).unwrap();
        let config = ExperimentConfig {
            params,
            horizon: 100,
            seeds: vec![0, 1, 2],
            initial_pred_vars: vec![],
            setups: vec![Setup::Pp, Setup::Wom],
            burn_in: 0,
        };
        let report = run_mse(&config).unwrap();
        for setup in &report.setups {
            for agent in &setup.agents {
                assert!(agent.mse_pred < 1e-6, "{} pred {}", setup.setup, agent.mse_pred);
                assert!(agent.mse_post < 1e-6, "{} post {}", setup.setup, agent.mse_post);
            }
        }
    }

    #[test]
    fn traces_reach_the_stationary_points() {
        // Cross-module check: the step-by-step recursion must land on the
        // fixed points the stationary analysis solves for, from every
        // initial variance, above and below.
        let mut config = iv_a_config(10_000, 1, 0);
        config.seeds = vec![0];
        let traces = run_convergence_trace(&config).unwrap();
        assert_eq!(traces.len(), 6); // 2 setups x 3 inits

        let pp = riccati::pp_cascade_fixed_points(&config.params).unwrap();
        let wom =
            riccati::wom_fixed_point(&config.params, WomMethod::BisectionOnFg, 1e-12).unwrap();
        for trace in &traces {
            let targets = match trace.setup {
                Setup::Pp => &pp,
                Setup::Wom => &wom,
            };
            for (agent_trace, target) in trace.agents.iter().zip(&targets.agents) {
                let last_pred = *agent_trace.pred_vars.last().unwrap();
                let last_gain = *agent_trace.gains.last().unwrap();
                let last_post = *agent_trace.post_vars.last().unwrap();
                assert!(
                    (last_pred - target.pred_var).abs() < 1e-6,
                    "{} init {} agent {}: {last_pred} vs {}",
                    trace.setup,
                    trace.initial_pred_var,
                    agent_trace.agent,
                    target.pred_var
                );
                assert!((last_gain - target.gain).abs() < 1e-6);
                assert!((last_post - target.post_var).abs() < 1e-6);
            }
        }
        // frozen endpoints for the reference setting
        for trace in traces.iter().filter(|t| t.setup == Setup::Pp) {
            for (agent, target) in trace.agents.iter().zip(PP_P_INF) {
                assert!((agent.pred_vars.last().unwrap() - target).abs() < 1e-6);
            }
        }
        for trace in traces.iter().filter(|t| t.setup == Setup::Wom) {
            assert!((trace.agents[2].pred_vars.last().unwrap() - WOM_P_INF).abs() < 1e-6);
        }
    }

    #[test]
    fn trace_started_at_the_fixed_point_stays_there() {
        let mut config = iv_a_config(200, 1, 0);
        config.initial_pred_vars = vec![WOM_P_INF];
        config.setups = vec![Setup::Wom];
        let traces = run_convergence_trace(&config).unwrap();
        for p in &traces[0].agents[2].pred_vars {
            assert!((p - WOM_P_INF).abs() < 1e-10);
        }

        // single-agent chain: both structures coincide at the plain solution
        let params = ModelParams::new(0.95, 1.0, 0.0, 3.0, vec![1.0]).unwrap();
        let prob = riccati::DareProblem::new(0.95, 1.0, 1.0).unwrap();
        let p_star = riccati::dare_closed_form(&prob);
        let config = ExperimentConfig {
            params,
            horizon: 200,
            seeds: vec![0],
            initial_pred_vars: vec![p_star],
            setups: vec![Setup::Pp],
            burn_in: 0,
        };
        let traces = run_convergence_trace(&config).unwrap();
        for p in &traces[0].agents[0].pred_vars {
            assert!((p - p_star).abs() < 1e-10);
        }
    }

    #[test]
    fn prediction_intervals_are_calibrated() {
        // The filters are exact for this model, so the claimed prediction
        // standard deviations must calibrate the realized one-step-ahead
        // errors.
        let config = iv_a_config(1000, 50, 50);
        for agent in 1..=3 {
            for report in run_coverage(&config, agent).unwrap() {
                let ones: Vec<f64> = report.per_seed.iter().map(|s| s.one_sigma).collect();
                let (mean, stderr) = mean_and_stderr(&ones);
                assert!(
                    (mean - 0.6827).abs() < 3.0 * stderr + 1e-3,
                    "{} agent {agent}: 1-sigma coverage {mean} (stderr {stderr})",
                    report.setup
                );
                assert!(
                    report.three_sigma >= 0.98,
                    "{} agent {agent}: 3-sigma coverage {}",
                    report.setup,
                    report.three_sigma
                );
            }
        }
    }

    #[test]
    fn mse_reports_are_deterministic() {
        let config = iv_a_config(200, 5, 10);
        let a = run_mse(&config).unwrap();
        let b = run_mse(&config).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn coverage_agrees_with_mse_tallies() {
        // run_mse and run_coverage share the same driver; their 3-sigma
        // numbers must agree exactly for every agent.
        let config = iv_a_config(300, 4, 20);
        let report = run_mse(&config).unwrap();
        for (si, setup_report) in report.setups.iter().enumerate() {
            for agent in 1..=3usize {
                let cov = &run_coverage(&config, agent).unwrap()[si];
                let pooled: f64 = cov
                    .per_seed
                    .iter()
                    .map(|s| s.three_sigma)
                    .sum::<f64>()
                    / cov.per_seed.len() as f64;
                assert!((setup_report.coverage_3sigma[agent - 1] - pooled).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn single_agent_comparison_is_a_tie() {
        let params = ModelParams::new(0.9, 0.5, 10.0, 2.0, vec![0.8]).unwrap();
        let config = ExperimentConfig {
            params,
            horizon: 500,
            seeds: (0..5).collect(),
            initial_pred_vars: vec![],
            setups: vec![Setup::Pp],
            burn_in: 10,
        };
        for cmp in paired_comparison(&config).unwrap() {
            assert_eq!(cmp.pp_mse_pred, cmp.wom_mse_pred);
            assert_eq!(cmp.pp_mse_post, cmp.wom_mse_post);
        }
    }

    #[test]
    fn relay_position_decides_who_benefits() {
        // Sharing the last agent's posterior hurts the well-informed head
        // of the chain and helps its noisy tail.
        let config = iv_a_config(1000, 10, 20);
        let cmps = paired_comparison(&config).unwrap();
        assert!(!cmps[0].wom_improves_post(), "agent 1 should prefer PP");
        assert!(!cmps[0].wom_improves_pred());
        assert!(cmps[2].wom_improves_post(), "agent 3 should prefer WoM");
        assert!(cmps[2].wom_improves_pred());
    }

    #[test]
    fn long_run_mse_matches_stationary_theory() {
        // Consistency: realized MSEs converge to the stationary variances;
        // checked within three estimated standard errors.
        let config = iv_a_config(10_000, 100, 0);
        let report = run_mse(&config).unwrap();
        for setup_report in &report.setups {
            for (i, agent) in setup_report.agents.iter().enumerate() {
                let fp = &setup_report.fixed_points.agents[i];
                assert!(
                    (agent.mse_pred - fp.pred_var).abs() < 3.0 * agent.stderr_pred,
                    "{} agent {}: mse_pred {} vs p_inf {} (stderr {})",
                    setup_report.setup,
                    i + 1,
                    agent.mse_pred,
                    fp.pred_var,
                    agent.stderr_pred
                );
                assert!(
                    (agent.mse_post - fp.post_var).abs() < 3.0 * agent.stderr_post,
                    "{} agent {}: mse_post {} vs post_inf {} (stderr {})",
                    setup_report.setup,
                    i + 1,
                    agent.mse_post,
                    fp.post_var,
                    agent.stderr_post
                );
            }
        }
        // frozen stationary values for the reference setting
        let pp = &report.setups[0];
        for i in 0..3 {
            assert!((pp.fixed_points.agents[i].pred_var - PP_P_INF[i]).abs() < 1e-10);
            assert!((pp.fixed_points.agents[i].post_var - PP_POST_INF[i]).abs() < 1e-10);
        }
    }

    #[test]
    fn pp_mse_grows_along_the_chain() {
        let config = iv_a_config(2000, 10, 50);
        let report = run_mse(&config).unwrap();
        let pp = &report.setups[0];
        assert_eq!(pp.setup, Setup::Pp);
        for w in pp.agents.windows(2) {
            assert!(w[1].mse_pred > w[0].mse_pred);
            assert!(w[1].mse_post > w[0].mse_post);
        }
    }

    #[test]
    fn trace_requires_initial_variances() {
        let mut config = iv_a_config(100, 1, 0);
        config.initial_pred_vars = vec![];
        assert!(run_convergence_trace(&config).is_err());
    }

    #[test]
    fn coverage_rejects_bad_agent_indices() {
        let config = iv_a_config(100, 2, 10);
        assert!(matches!(
            run_coverage(&config, 0),
            Err(Error::AgentIndex { .. })
        ));
        assert!(matches!(
            run_coverage(&config, 4),
            Err(Error::AgentIndex { .. })
        ));
    }
}
