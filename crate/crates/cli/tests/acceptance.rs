//! Acceptance gate: one test per criterion, each printing a single
//! PASS/FAIL line (visible with `--nocapture` or on failure) and failing
//! loudly with every unmet sub-check listed. Runtime budgets are enforced
//! as part of each criterion.

use std::fmt::Display;
use std::process::Command;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use womkf::chain::{self, PriorConvention, Setup};
use womkf::experiments::{self, ExperimentConfig};
use womkf::model::{simulate, ModelParams};
use womkf::riccati::{self, DareProblem, WomMethod};

/// Collects sub-check failures for one acceptance criterion and enforces
/// its runtime budget.
struct Criterion {
    number: usize,
    label: &'static str,
    budget: Duration,
    started: Instant,
    failures: Vec<String>,
}

impl Criterion {
    fn new(number: usize, label: &'static str, budget_secs: f64) -> Self {
        Criterion {
            number,
            label,
            budget: Duration::from_secs_f64(budget_secs),
            started: Instant::now(),
            failures: Vec::new(),
        }
    }

    fn check(&mut self, what: impl Display, ok: bool) {
        if !ok {
            self.failures.push(what.to_string());
        }
    }

    fn finish(mut self) {
        let elapsed = self.started.elapsed();
        if elapsed > self.budget {
            self.failures.push(format!(
                "runtime {elapsed:.2?} exceeded the {:.2?} budget",
                self.budget
            ));
        }
        let verdict = if self.failures.is_empty() { "PASS" } else { "FAIL" };
        println!(
            "criterion {} ({}): {verdict} [{elapsed:.2?}]",
            self.number, self.label
        );
        for failure in &self.failures {
            println!("  - {failure}");
        }
        assert!(
            self.failures.is_empty(),
            "criterion {} ({}) failed:\n{}",
            self.number,
            self.label,
            self.failures.join("\n")
        );
    }
}

fn reference_params() -> ModelParams {
    ModelParams::new(0.95, 1.0, 25.0, 3.0, vec![1.0, 1.0, 1.0]).unwrap()
}

fn reference_config(horizon: usize, n_seeds: u64) -> ExperimentConfig {
    ExperimentConfig {
        params: reference_params(),
        horizon,
        seeds: (0..n_seeds).collect(),
        initial_pred_vars: vec![0.1, 3.7075, 50.0],
        setups: vec![Setup::Pp, Setup::Wom],
        burn_in: 0,
    }
}

/// Run the installed binary and return (exit code, stdout).
fn run_binary(args: &[&str]) -> (Option<i32>, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_womkf"))
        .args(args)
        .output()
        .expect("binary runs");
    (out.status.code(), String::from_utf8_lossy(&out.stdout).into_owned())
}

/// Parse `p_inf` per agent for one setup out of a fixpoints.csv body.
fn pred_vars_from_csv(csv: &str, setup: &str) -> Vec<f64> {
    csv.lines()
        .skip(1)
        .filter_map(|line| {
            let cells: Vec<&str> = line.split(',').collect();
            (cells.first() == Some(&setup)).then(|| cells[2].parse::<f64>().unwrap())
        })
        .collect()
}

#[test]
fn criterion_1_private_prior_stationary_variances() {
    let mut c = Criterion::new(1, "private-prior stationary variances", 1.0);

    let dir = tempfile::tempdir().unwrap();
    let (code, _) = run_binary(&["fixpoints", "--setup", "pp", "--out", dir.path().to_str().unwrap()]);
    c.check(format!("fixpoints exits 0 (got {code:?})"), code == Some(0));

    let csv = std::fs::read_to_string(dir.path().join("fixpoints.csv")).unwrap_or_default();
    let got = pred_vars_from_csv(&csv, "PP");
    c.check(format!("three agents reported (got {})", got.len()), got.len() == 3);
    for (i, (&p, &target)) in got.iter().zip(&[1.55, 2.27, 3.34]).enumerate() {
        c.check(
            format!(
                "agent {} prediction variance {p:.6} within 0.01 of {target}",
                i + 1
            ),
            (p - target).abs() <= 0.01,
        );
    }
    c.finish();
}

#[test]
fn criterion_2_word_of_mouth_shared_fixed_point() {
    let mut c = Criterion::new(2, "word-of-mouth shared fixed point", 1.0);

    let dir = tempfile::tempdir().unwrap();
    let (code, _) = run_binary(&["fixpoints", "--setup", "wom", "--out", dir.path().to_str().unwrap()]);
    c.check(format!("fixpoints exits 0 (got {code:?})"), code == Some(0));

    let csv = std::fs::read_to_string(dir.path().join("fixpoints.csv")).unwrap_or_default();
    let got = pred_vars_from_csv(&csv, "WoM");
    c.check(format!("three agents reported (got {})", got.len()), got.len() == 3);
    for (i, &p) in got.iter().enumerate() {
        c.check(
            format!("agent {} shared variance {p:.6} within 0.01 of 2.79", i + 1),
            (p - 2.79).abs() <= 0.01,
        );
    }
    c.check(
        "all agents report one shared variance",
        got.windows(2).all(|w| w[0] == w[1]),
    );

    let params = reference_params();
    let bis = riccati::wom_fixed_point(&params, WomMethod::BisectionOnFg, 1e-12).unwrap();
    let iter = riccati::wom_fixed_point(&params, WomMethod::ContractionIteration, 1e-12).unwrap();
    let p_bis = bis.agents[0].pred_var;
    let p_iter = iter.agents[0].pred_var;
    let diff = (p_bis - p_iter).abs() / p_bis;
    c.check(
        format!("bisection {p_bis} and iteration {p_iter} agree within 1e-9 (diff {diff:.3e})"),
        diff <= 1e-9,
    );
    c.finish();
}

#[test]
fn criterion_3_variance_traces_reach_the_fixed_points() {
    let mut c = Criterion::new(3, "variance traces reach the fixed points", 1.0);

    let mut config = reference_config(10_000, 1);
    config.initial_pred_vars = vec![0.1, 3.7075, 50.0];
    let traces = experiments::run_convergence_trace(&config).unwrap();
    c.check(
        format!("six traces (got {})", traces.len()),
        traces.len() == 6,
    );

    let params = reference_params();
    let pp = riccati::pp_cascade_fixed_points(&params).unwrap();
    let wom = riccati::wom_fixed_point(&params, WomMethod::BisectionOnFg, 1e-12).unwrap();
    for trace in &traces {
        let target = match trace.setup {
            Setup::Pp => &pp,
            Setup::Wom => &wom,
        };
        for (at, fp) in trace.agents.iter().zip(&target.agents) {
            let last = *at.pred_vars.last().unwrap();
            let gap = (last - fp.pred_var).abs();
            c.check(
                format!(
                    "{} from p={} agent {}: |{last:.12} - {:.12}| = {gap:.3e} <= 1e-6",
                    trace.setup, trace.initial_pred_var, at.agent, fp.pred_var
                ),
                gap <= 1e-6,
            );
        }
    }
    c.finish();
}

#[test]
fn criterion_4_monte_carlo_error_reproduction() {
    let mut c = Criterion::new(4, "Monte Carlo error reproduction", 30.0);

    let report = experiments::run_mse(&reference_config(1000, 50)).unwrap();
    let pp = &report.setups[0];
    let wom = &report.setups[1];

    for (i, &target) in [1.54, 2.13, 3.24].iter().enumerate() {
        let got = pp.agents[i].mse_pred;
        c.check(
            format!("PP agent {} prediction MSE {got:.6} within 0.15 of {target}", i + 1),
            (got - target).abs() <= 0.15,
        );
    }
    for agent in &wom.agents {
        c.check(
            format!(
                "WoM agent {} prediction MSE {:.6} within 0.15 of 2.71",
                agent.agent, agent.mse_pred
            ),
            (agent.mse_pred - 2.71).abs() <= 0.15,
        );
    }

    // Posterior comparison: sharing must hurt agent 1 and help agents 2, 3.
    let signs = [
        ("worse for agent 1", 0, false),
        ("better for agent 2", 1, true),
        ("better for agent 3", 2, true),
    ];
    for (label, i, wom_better) in signs {
        let p = pp.agents[i].mse_post;
        let w = wom.agents[i].mse_post;
        let ok = if wom_better { w < p } else { w > p };
        c.check(
            format!("posterior sign {label}: WoM {w:.6} vs PP {p:.6}"),
            ok,
        );
    }
    for (i, &target) in [0.66, 1.58, 2.73].iter().enumerate() {
        let got = pp.agents[i].mse_post;
        c.check(
            format!("PP agent {} posterior MSE {got:.6} within 0.15 of {target}", i + 1),
            (got - target).abs() <= 0.15,
        );
    }
    for (i, &target) in [0.78, 1.49, 2.10].iter().enumerate() {
        let got = wom.agents[i].mse_post;
        c.check(
            format!("WoM agent {} posterior MSE {got:.6} within 0.15 of {target}", i + 1),
            (got - target).abs() <= 0.15,
        );
    }
    c.finish();
}

#[test]
fn criterion_5_two_agent_contraction_certificate() {
    let mut c = Criterion::new(5, "two-agent variance map contraction", 5.0);

    let params = ModelParams::new(0.95, 1.0, 25.0, 3.0, vec![1.0, 1.0]).unwrap();
    let ratio = riccati::contraction_certificate(&params, 10_000, 50).unwrap();
    let bound = 0.95 * 0.95 + 1e-9;
    c.check(
        format!("sampled Lipschitz ratio {ratio:.12} <= {bound:.12}"),
        ratio <= bound,
    );
    c.check(format!("ratio {ratio} is positive"), ratio > 0.0);
    c.finish();
}

#[test]
fn criterion_6_noise_polynomial_matches_the_recursion() {
    let mut c = Criterion::new(6, "equivalent-noise polynomial oracle", 1.0);

    let params = ModelParams::new(0.95, 1.0, 0.0, 3.0, vec![0.8, 1.7, 0.4, 2.3]).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for i in 2..=4usize {
        let poly = riccati::build_noise_polynomial(&params, i).unwrap();
        c.check(
            format!("agent {i} degree {} equals {}", poly.degree(), (1usize << i) - 2),
            poly.degree() == (1usize << i) - 2,
        );
        c.check(
            format!("agent {i} coefficients all positive"),
            poly.coeffs.iter().all(|&co| co > 0.0),
        );
        let mut worst: f64 = 0.0;
        for _ in 0..100 {
            let p = 10f64.powf(rng.gen_range(-2.0..3.0));
            let sweep = chain::variance_correction(&params, Setup::Wom, &[p; 4]).unwrap();
            let truth = sweep.eq_noise_vars[i - 1];
            worst = worst.max((poly.eval(p) - truth).abs() / truth);
        }
        c.check(
            format!("agent {i} worst relative gap {worst:.3e} <= 1e-10"),
            worst <= 1e-10,
        );
    }
    c.finish();
}

#[test]
fn criterion_7_closed_form_agrees_with_iterated_solver() {
    let mut c = Criterion::new(7, "closed form vs iterated stationary solver", 1.0);

    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst: f64 = 0.0;
    let mut worst_at = (0.0, 0.0, 0.0);
    for _ in 0..1000 {
        let a = rng.gen_range(-0.99..0.99);
        let q = 10f64.powf(rng.gen_range(-6.0..6.0));
        let r = 10f64.powf(rng.gen_range(-6.0..6.0));
        let prob = DareProblem::new(a, q, r).unwrap();
        let closed = riccati::dare_closed_form(&prob);
        let (iterated, _steps) = riccati::dare_iterate(&prob, q, 1e-13, 1_000_000).unwrap();
        let diff = (closed - iterated).abs() / closed;
        if diff > worst {
            worst = diff;
            worst_at = (a, q, r);
        }
    }
    c.check(
        format!("worst relative disagreement {worst:.3e} <= 1e-9 (at {worst_at:?})"),
        worst <= 1e-9,
    );
    c.finish();
}

#[test]
fn criterion_8_randomized_property_suite() {
    let mut c = Criterion::new(8, "randomized property suite", 10.0);

    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for case in 0..500usize {
        let m = rng.gen_range(1..=4usize);
        let magnitude = rng.gen_range(0.1..0.95);
        let a = if rng.gen_bool(0.5) { magnitude } else { -magnitude };
        let q = rng.gen_range(0.5..5.0);
        let s: Vec<f64> = (0..m).map(|_| rng.gen_range(0.2..2.5)).collect();
        let tag = format!("case {case} (a={a}, q={q}, s={s:?})");
        let params = ModelParams::new(
            a,
            q,
            rng.gen_range(-10.0..10.0),
            rng.gen_range(0.5..5.0),
            s,
        )
        .unwrap();

        let pp = match riccati::pp_cascade_fixed_points(&params) {
            Ok(report) => report,
            Err(err) => {
                c.check(format!("{tag}: PP solve failed: {err}"), false);
                continue;
            }
        };
        let wom = match riccati::wom_fixed_point(&params, WomMethod::BisectionOnFg, 1e-12) {
            Ok(report) => report,
            Err(err) => {
                c.check(format!("{tag}: WoM solve failed: {err}"), false);
                continue;
            }
        };

        for report in [&pp, &wom] {
            for agent in &report.agents {
                c.check(
                    format!(
                        "{tag}: {} agent {} gain {} inside (0,1)",
                        report.setup, agent.agent, agent.gain
                    ),
                    agent.gain > 0.0 && agent.gain < 1.0,
                );
                let closed_loop = (1.0 - agent.gain) * a;
                c.check(
                    format!(
                        "{tag}: {} agent {} closed-loop factor {closed_loop} inside (-1,1)",
                        report.setup, agent.agent
                    ),
                    closed_loop > -1.0 && closed_loop < 1.0,
                );
            }
        }
        c.check(
            format!("{tag}: PP equivalent noise strictly increases along the chain"),
            pp.agents.windows(2).all(|w| w[1].eq_noise_var > w[0].eq_noise_var),
        );
        let hi = q / (1.0 - a * a);
        let shared = wom.agents[0].pred_var;
        c.check(
            format!("{tag}: WoM fixed point {shared} inside ({q}, {hi})"),
            shared > q && shared < hi,
        );
        c.check(
            format!("{tag}: WoM agents share one prediction variance"),
            wom.agents.iter().all(|ag| ag.pred_var == shared),
        );

        // Shared prior on realized data: after every step, the next
        // prediction is identical (bitwise) for every agent.
        let traj = simulate(&params, 5, case as u64).unwrap();
        let mut state = chain::init_chain(&params, Setup::Wom, PriorConvention::PosteriorAtZero);
        for k in 0..traj.horizon() {
            state =
                chain::time_step(&params, &state, traj.states[k], &traj.injected_noise[k]).unwrap();
            let next = chain::predict(&params, &state);
            let mean0 = next.slots[0].pred_mean;
            let var0 = next.slots[0].pred_var;
            c.check(
                format!("{tag}: step {} broadcast prior identical across agents", k + 1),
                next.slots.iter().all(|sl| sl.pred_mean == mean0 && sl.pred_var == var0),
            );
        }

        // Determinism: re-solving produces bit-identical reports.
        let wom_again = riccati::wom_fixed_point(&params, WomMethod::BisectionOnFg, 1e-12).unwrap();
        c.check(format!("{tag}: repeated WoM solve is bit-identical"), wom_again == wom);
        let pp_again = riccati::pp_cascade_fixed_points(&params).unwrap();
        c.check(format!("{tag}: repeated PP solve is bit-identical"), pp_again == pp);

        if case % 100 == 0 {
            let config = ExperimentConfig {
                params: params.clone(),
                horizon: 40,
                seeds: vec![0, 1, 2],
                initial_pred_vars: vec![],
                setups: vec![Setup::Pp, Setup::Wom],
                burn_in: 0,
            };
            let first = experiments::run_mse(&config).unwrap();
            let second = experiments::run_mse(&config).unwrap();
            c.check(
                format!("{tag}: repeated Monte Carlo run is bit-identical"),
                first == second,
            );
        }
    }
    c.finish();
}

#[test]
fn criterion_9_three_sigma_coverage_for_the_last_agent() {
    let mut c = Criterion::new(9, "three-sigma one-step-ahead coverage", 10.0);

    let reports = experiments::run_coverage(&reference_config(1000, 50), 3).unwrap();
    c.check(
        format!("both setups reported (got {})", reports.len()),
        reports.len() == 2,
    );
    for report in &reports {
        c.check(
            format!(
                "{} agent 3 three-sigma coverage {:.4} >= 0.98",
                report.setup, report.three_sigma
            ),
            report.three_sigma >= 0.98,
        );
    }
    c.finish();
}
