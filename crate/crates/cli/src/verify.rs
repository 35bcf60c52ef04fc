//! The `verify` subcommand: read a previously written output directory,
//! re-run the computations its manifest describes, and confirm every CSV
//! value matches the recomputation and satisfies the structural
//! invariants (gain bounds, noise monotonicity, shared-variance bracket).
//!
//! Exit behavior: a missing or malformed directory/manifest is an input
//! error (exit 2); a value that fails to reproduce or an invariant that
//! fails to hold is a verification failure (exit 1).

use std::collections::HashMap;
use std::fmt::Display;
use std::path::Path;

use womkf::chain::Setup;
use womkf::model::ModelParams;

use crate::settings::{self, SeedSource, Settings};
use crate::{solve_fixed_points, Failure};

/// Recomputed values may differ from CSV values only by the 12-significant-
/// digit rendering, which this bound absorbs with orders of magnitude to
/// spare.
fn close(got: f64, want: f64) -> bool {
    (got - want).abs() <= 1e-9 * got.abs().max(want.abs()).max(1.0)
}

/// Tally of checks for one file, collecting descriptions of any failures.
struct Checker {
    file: &'static str,
    checked: usize,
    failures: Vec<String>,
}

impl Checker {
    fn new(file: &'static str) -> Self {
        Checker {
            file,
            checked: 0,
            failures: Vec::new(),
        }
    }

    /// Record one comparison against a recomputed value.
    fn value(&mut self, what: impl Display, got: f64, want: f64) {
        self.checked += 1;
        if !close(got, want) {
            self.failures
                .push(format!("{}: {what} is {got}, recomputed {want}", self.file));
        }
    }

    /// Record one structural invariant.
    fn invariant(&mut self, what: impl Display, holds: bool) {
        self.checked += 1;
        if !holds {
            self.failures
                .push(format!("{}: invariant violated: {what}", self.file));
        }
    }

    fn finish(self, all_failures: &mut Vec<String>) {
        println!("  {}: {} checks", self.file, self.checked);
        all_failures.extend(self.failures);
    }
}

fn manifest_map(dir: &Path) -> Result<HashMap<String, String>, Failure> {
    let path = dir.join("manifest.txt");
    let body = std::fs::read_to_string(&path)
        .map_err(|err| Failure::Input(format!("cannot read manifest {}: {err}", path.display())))?;
    let mut map = HashMap::new();
    for line in body.lines() {
        if let Some((key, value)) = line.split_once('=') {
            map.insert(key.trim().to_string(), value.trim().to_string());
        }
    }
    Ok(map)
}

fn require<'m>(map: &'m HashMap<String, String>, key: &str) -> Result<&'m str, Failure> {
    map.get(key)
        .map(String::as_str)
        .ok_or_else(|| Failure::Input(format!("manifest is missing key {key:?}")))
}

fn manifest_f64(map: &HashMap<String, String>, key: &str) -> Result<f64, Failure> {
    require(map, key)?
        .parse::<f64>()
        .map_err(|_| Failure::Input(format!("manifest key {key:?} is not a number")))
}

fn manifest_usize(map: &HashMap<String, String>, key: &str) -> Result<usize, Failure> {
    require(map, key)?
        .parse::<usize>()
        .map_err(|_| Failure::Input(format!("manifest key {key:?} is not an integer")))
}

/// Reconstruct the run settings a manifest describes.
fn rebuild_settings(map: &HashMap<String, String>) -> Result<Settings, Failure> {
    let command = match require(map, "command")? {
        "simulate" => "simulate",
        "fixpoints" => "fixpoints",
        "mse" => "mse",
        "trace" => "trace",
        "coverage" => "coverage",
        "compare" => "compare",
        other => {
            return Err(Failure::Input(format!(
                "manifest names unknown command {other:?}"
            )))
        }
    };
    let a = manifest_f64(map, "a")?;
    let q = manifest_f64(map, "q")?;
    let x0 = manifest_f64(map, "x0")?;
    let p0 = manifest_f64(map, "p0")?;
    let s = require(map, "s")?
        .split(',')
        .map(|tok| {
            tok.trim()
                .parse::<f64>()
                .map_err(|_| Failure::Input(format!("manifest key \"s\" has bad entry {tok:?}")))
        })
        .collect::<Result<Vec<f64>, Failure>>()?;
    let params = ModelParams::new(a, q, x0, p0, s).map_err(Failure::from_error)?;
    let m = params.num_agents();

    let horizon = manifest_usize(map, "K")?;
    let burn_in = manifest_usize(map, "burn_in")?;
    let tol = manifest_f64(map, "tol")?;
    let setups = require(map, "setups")?
        .split(',')
        .map(|tok| match tok.trim() {
            "pp" => Ok(Setup::Pp),
            "wom" => Ok(Setup::Wom),
            other => Err(Failure::Input(format!(
                "manifest lists unknown setup {other:?}"
            ))),
        })
        .collect::<Result<Vec<Setup>, Failure>>()?;

    let (seeds, sim_seed, seed_source) = if command == "simulate" {
        let seed = require(map, "seed")?
            .parse::<u64>()
            .map_err(|_| Failure::Input("manifest key \"seed\" is not an integer".to_string()))?;
        let source = match require(map, "seed_source")? {
            "given" => SeedSource::Given,
            "entropy" => SeedSource::Entropy,
            other => {
                return Err(Failure::Input(format!(
                    "manifest names unknown seed source {other:?}"
                )))
            }
        };
        (vec![0], seed, source)
    } else {
        let seeds = settings::parse_seeds(require(map, "seeds")?)?;
        (seeds, 0, SeedSource::Given)
    };

    let inits = match map.get("inits") {
        Some(spec) => spec
            .split(',')
            .map(|tok| {
                tok.trim().parse::<f64>().map_err(|_| {
                    Failure::Input(format!("manifest key \"inits\" has bad entry {tok:?}"))
                })
            })
            .collect::<Result<Vec<f64>, Failure>>()?,
        None => vec![0.1, 3.7075, 50.0],
    };
    let agent = match map.get("agent") {
        Some(v) => v
            .parse::<usize>()
            .map_err(|_| Failure::Input("manifest key \"agent\" is not an integer".to_string()))?,
        None => m,
    };

    let settings = Settings {
        command,
        params,
        horizon,
        seeds,
        inits,
        setups,
        burn_in,
        tol,
        agent,
        sim_seed,
        seed_source,
        out: None,
    };
    settings
        .experiment_config()
        .validate()
        .map_err(Failure::from_error)?;
    Ok(settings)
}

/// Parsed CSV: the header fields and the data rows.
struct Csv {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

/// Read and split a CSV if it exists; `Ok(None)` when the file is absent.
fn read_csv(dir: &Path, name: &str) -> Result<Option<Csv>, Failure> {
    let path = dir.join(name);
    if !path.exists() {
        return Ok(None);
    }
    let body = std::fs::read_to_string(&path)
        .map_err(|err| Failure::Input(format!("cannot read {}: {err}", path.display())))?;
    let mut lines = body.lines();
    let Some(header_line) = lines.next() else {
        return Err(Failure::Input(format!("{} is empty", path.display())));
    };
    let header = header_line.split(',').map(str::to_string).collect();
    let rows = lines
        .map(|line| line.split(',').map(str::to_string).collect())
        .collect();
    Ok(Some(Csv { header, rows }))
}

fn field_f64(checker: &mut Checker, row: &[String], idx: usize, what: &str) -> Option<f64> {
    match row.get(idx).and_then(|tok| tok.parse::<f64>().ok()) {
        Some(v) => Some(v),
        None => {
            checker.checked += 1;
            checker
                .failures
                .push(format!("{}: {what} is not a number in row {row:?}", checker.file));
            None
        }
    }
}

fn expect_header(checker: &mut Checker, csv: &Csv, expected: &str) -> bool {
    let got = csv.header.join(",");
    checker.invariant(format!("header is {expected:?}"), got == expected);
    got == expected
}

fn setup_of(checker: &mut Checker, row: &[String]) -> Option<Setup> {
    match row.first().map(String::as_str) {
        Some("PP") => Some(Setup::Pp),
        Some("WoM") => Some(Setup::Wom),
        other => {
            checker.checked += 1;
            checker
                .failures
                .push(format!("{}: unknown setup {other:?}", checker.file));
            None
        }
    }
}

fn verify_fixpoints(
    dir: &Path,
    settings: &Settings,
    failures: &mut Vec<String>,
) -> Result<(), Failure> {
    let Some(csv) = read_csv(dir, "fixpoints.csv")? else {
        return Ok(());
    };
    let mut ck = Checker::new("fixpoints.csv");
    if expect_header(&mut ck, &csv, "setup,agent,p_inf,alpha_inf,r_inf,p_post_inf") {
        let reports = solve_fixed_points(settings)?;
        let m = settings.params.num_agents();
        ck.invariant(
            format!("one row per setup and agent ({} expected)", reports.len() * m),
            csv.rows.len() == reports.len() * m,
        );
        let a2 = settings.params.a * settings.params.a;
        let hi = settings.params.q / (1.0 - a2);
        let mut prev: Option<(Setup, f64, f64)> = None; // (setup, r_inf, p_inf)
        for row in &csv.rows {
            let Some(setup) = setup_of(&mut ck, row) else { continue };
            let (Some(agent), Some(p), Some(alpha), Some(r), Some(post)) = (
                row.get(1).and_then(|t| t.parse::<usize>().ok()),
                field_f64(&mut ck, row, 2, "p_inf"),
                field_f64(&mut ck, row, 3, "alpha_inf"),
                field_f64(&mut ck, row, 4, "r_inf"),
                field_f64(&mut ck, row, 5, "p_post_inf"),
            ) else {
                continue;
            };
            let Some(report) = reports.iter().find(|r| r.setup == setup) else {
                ck.invariant(format!("{} appears in the manifest setups", setup), false);
                continue;
            };
            let Some(want) = report.agents.get(agent.wrapping_sub(1)) else {
                ck.invariant(format!("agent {agent} exists"), false);
                continue;
            };
            ck.value(format!("{setup} agent {agent} p_inf"), p, want.pred_var);
            ck.value(format!("{setup} agent {agent} alpha_inf"), alpha, want.gain);
            ck.value(format!("{setup} agent {agent} r_inf"), r, want.eq_noise_var);
            ck.value(format!("{setup} agent {agent} p_post_inf"), post, want.post_var);
            ck.invariant(
                format!("{setup} agent {agent} gain in (0,1)"),
                alpha > 0.0 && alpha < 1.0,
            );
            ck.invariant(
                format!("{setup} agent {agent} posterior below prediction"),
                post < p,
            );
            match setup {
                Setup::Pp => {
                    if let Some((Setup::Pp, prev_r, prev_p)) = prev {
                        ck.invariant(
                            format!("PP noise grows along the chain at agent {agent}"),
                            r > prev_r,
                        );
                        ck.invariant(
                            format!("PP prediction variance grows at agent {agent}"),
                            p > prev_p,
                        );
                    }
                }
                Setup::Wom => {
                    ck.invariant(
                        format!("WoM agent {agent} shared variance inside bracket"),
                        p > settings.params.q && p < hi,
                    );
                    if let Some((Setup::Wom, _, prev_p)) = prev {
                        ck.invariant(
                            format!("WoM agent {agent} shares the variance"),
                            p == prev_p,
                        );
                    }
                }
            }
            prev = Some((setup, r, p));
        }
    }
    ck.finish(failures);
    Ok(())
}

fn verify_mse(dir: &Path, settings: &Settings, failures: &mut Vec<String>) -> Result<(), Failure> {
    let Some(csv) = read_csv(dir, "mse.csv")? else {
        return Ok(());
    };
    let mut ck = Checker::new("mse.csv");
    if expect_header(
        &mut ck,
        &csv,
        "setup,agent,mse_pred,mse_post,stderr_pred,stderr_post",
    ) {
        let report = womkf::experiments::run_mse(&settings.experiment_config())?;
        for row in &csv.rows {
            let Some(setup) = setup_of(&mut ck, row) else { continue };
            let (Some(agent), Some(pred), Some(post), Some(se_pred), Some(se_post)) = (
                row.get(1).and_then(|t| t.parse::<usize>().ok()),
                field_f64(&mut ck, row, 2, "mse_pred"),
                field_f64(&mut ck, row, 3, "mse_post"),
                field_f64(&mut ck, row, 4, "stderr_pred"),
                field_f64(&mut ck, row, 5, "stderr_post"),
            ) else {
                continue;
            };
            let Some(want) = report
                .setups
                .iter()
                .find(|s| s.setup == setup)
                .and_then(|s| s.agents.get(agent.wrapping_sub(1)))
            else {
                ck.invariant(format!("{setup} agent {agent} exists"), false);
                continue;
            };
            ck.value(format!("{setup} agent {agent} mse_pred"), pred, want.mse_pred);
            ck.value(format!("{setup} agent {agent} mse_post"), post, want.mse_post);
            ck.value(
                format!("{setup} agent {agent} stderr_pred"),
                se_pred,
                want.stderr_pred,
            );
            ck.value(
                format!("{setup} agent {agent} stderr_post"),
                se_post,
                want.stderr_post,
            );
            ck.invariant(
                format!("{setup} agent {agent} errors nonnegative"),
                pred >= 0.0 && post >= 0.0 && se_pred >= 0.0 && se_post >= 0.0,
            );
        }
    }
    ck.finish(failures);
    Ok(())
}

fn verify_trace(dir: &Path, settings: &Settings, failures: &mut Vec<String>) -> Result<(), Failure> {
    let Some(csv) = read_csv(dir, "trace.csv")? else {
        return Ok(());
    };
    let mut ck = Checker::new("trace.csv");
    if expect_header(&mut ck, &csv, "setup,agent,k,init_id,p_pred,gain,p_post") {
        let traces = womkf::experiments::run_convergence_trace(&settings.experiment_config())?;
        for row in &csv.rows {
            let Some(setup) = setup_of(&mut ck, row) else { continue };
            let (Some(agent), Some(k), Some(init_id), Some(p_pred), Some(gain), Some(p_post)) = (
                row.get(1).and_then(|t| t.parse::<usize>().ok()),
                row.get(2).and_then(|t| t.parse::<usize>().ok()),
                row.get(3).and_then(|t| t.parse::<usize>().ok()),
                field_f64(&mut ck, row, 4, "p_pred"),
                field_f64(&mut ck, row, 5, "gain"),
                field_f64(&mut ck, row, 6, "p_post"),
            ) else {
                continue;
            };
            let want = traces
                .iter()
                .find(|t| t.setup == setup && t.init_id == init_id)
                .and_then(|t| t.agents.get(agent.wrapping_sub(1)))
                .filter(|at| k >= 1 && k <= at.pred_vars.len());
            let Some(at) = want else {
                ck.invariant(
                    format!("{setup} agent {agent} step {k} init {init_id} exists"),
                    false,
                );
                continue;
            };
            ck.value(
                format!("{setup} agent {agent} step {k} init {init_id} p_pred"),
                p_pred,
                at.pred_vars[k - 1],
            );
            ck.value(
                format!("{setup} agent {agent} step {k} init {init_id} gain"),
                gain,
                at.gains[k - 1],
            );
            ck.value(
                format!("{setup} agent {agent} step {k} init {init_id} p_post"),
                p_post,
                at.post_vars[k - 1],
            );
            ck.invariant(
                format!("{setup} agent {agent} step {k} gain in (0,1)"),
                gain > 0.0 && gain < 1.0,
            );
            ck.invariant(
                format!("{setup} agent {agent} step {k} posterior below prediction"),
                p_post < p_pred,
            );
        }
    }
    ck.finish(failures);
    Ok(())
}

fn verify_coverage(
    dir: &Path,
    settings: &Settings,
    failures: &mut Vec<String>,
) -> Result<(), Failure> {
    let Some(csv) = read_csv(dir, "coverage.csv")? else {
        return Ok(());
    };
    let mut ck = Checker::new("coverage.csv");
    if expect_header(&mut ck, &csv, "setup,agent,n_sigma,coverage") {
        let reports =
            womkf::experiments::run_coverage(&settings.experiment_config(), settings.agent)?;
        for row in &csv.rows {
            let Some(setup) = setup_of(&mut ck, row) else { continue };
            let (Some(agent), Some(n_sigma), Some(coverage)) = (
                row.get(1).and_then(|t| t.parse::<usize>().ok()),
                row.get(2).and_then(|t| t.parse::<usize>().ok()),
                field_f64(&mut ck, row, 3, "coverage"),
            ) else {
                continue;
            };
            let Some(report) = reports.iter().find(|r| r.setup == setup) else {
                ck.invariant(format!("{setup} appears in the manifest setups"), false);
                continue;
            };
            ck.invariant(
                format!("{setup} coverage row names agent {}", settings.agent),
                agent == settings.agent,
            );
            let want = match n_sigma {
                1 => report.one_sigma,
                3 => report.three_sigma,
                other => {
                    ck.invariant(format!("interval width {other} is 1 or 3"), false);
                    continue;
                }
            };
            ck.value(format!("{setup} {n_sigma}-sigma coverage"), coverage, want);
            ck.invariant(
                format!("{setup} {n_sigma}-sigma coverage within [0,1]"),
                (0.0..=1.0).contains(&coverage),
            );
        }
    }
    ck.finish(failures);
    Ok(())
}

fn verify_compare(
    dir: &Path,
    settings: &Settings,
    failures: &mut Vec<String>,
) -> Result<(), Failure> {
    let Some(csv) = read_csv(dir, "compare.csv")? else {
        return Ok(());
    };
    let mut ck = Checker::new("compare.csv");
    if expect_header(
        &mut ck,
        &csv,
        "agent,pp_mse_pred,wom_mse_pred,pp_mse_post,wom_mse_post,wom_post_improved",
    ) {
        let cmps = womkf::experiments::paired_comparison(&settings.experiment_config())?;
        for row in &csv.rows {
            let (Some(agent), Some(pp_pred), Some(wom_pred), Some(pp_post), Some(wom_post)) = (
                row.first().and_then(|t| t.parse::<usize>().ok()),
                field_f64(&mut ck, row, 1, "pp_mse_pred"),
                field_f64(&mut ck, row, 2, "wom_mse_pred"),
                field_f64(&mut ck, row, 3, "pp_mse_post"),
                field_f64(&mut ck, row, 4, "wom_mse_post"),
            ) else {
                continue;
            };
            let Some(want) = cmps.get(agent.wrapping_sub(1)) else {
                ck.invariant(format!("agent {agent} exists"), false);
                continue;
            };
            ck.value(format!("agent {agent} pp_mse_pred"), pp_pred, want.pp_mse_pred);
            ck.value(format!("agent {agent} wom_mse_pred"), wom_pred, want.wom_mse_pred);
            ck.value(format!("agent {agent} pp_mse_post"), pp_post, want.pp_mse_post);
            ck.value(format!("agent {agent} wom_mse_post"), wom_post, want.wom_mse_post);
            ck.invariant(
                format!("agent {agent} improvement flag matches the errors"),
                row.get(5).map(String::as_str)
                    == Some(if want.wom_improves_post() { "1" } else { "0" }),
            );
        }
    }
    ck.finish(failures);
    Ok(())
}

fn verify_trajectory(
    dir: &Path,
    settings: &Settings,
    failures: &mut Vec<String>,
) -> Result<(), Failure> {
    let Some(csv) = read_csv(dir, "trajectory.csv")? else {
        return Ok(());
    };
    let mut ck = Checker::new("trajectory.csv");
    let m = settings.params.num_agents();
    let mut expected_header = String::from("k,state,process_noise");
    for i in 1..=m {
        expected_header.push_str(&format!(",v{i}"));
    }
    if expect_header(&mut ck, &csv, &expected_header) {
        let traj =
            womkf::model::simulate(&settings.params, settings.horizon, settings.sim_seed)?;
        ck.invariant(
            format!("one row per step plus the initial state ({})", traj.horizon() + 1),
            csv.rows.len() == traj.horizon() + 1,
        );
        for row in &csv.rows {
            let Some(k) = row.first().and_then(|t| t.parse::<usize>().ok()) else {
                ck.invariant(format!("step index parses in row {row:?}"), false);
                continue;
            };
            let Some(state) = field_f64(&mut ck, row, 1, "state") else { continue };
            if k == 0 {
                ck.value("initial state", state, traj.initial_state);
                continue;
            }
            if k > traj.horizon() {
                ck.invariant(format!("step {k} within horizon"), false);
                continue;
            }
            ck.value(format!("state at step {k}"), state, traj.states[k - 1]);
            if let Some(w) = field_f64(&mut ck, row, 2, "process_noise") {
                ck.value(format!("process noise at step {k}"), w, traj.process_noise[k - 1]);
            }
            for i in 0..m {
                if let Some(v) = field_f64(&mut ck, row, 3 + i, "injected noise") {
                    ck.value(
                        format!("agent {} noise at step {k}", i + 1),
                        v,
                        traj.injected_noise[k - 1][i],
                    );
                }
            }
        }
    }
    ck.finish(failures);
    Ok(())
}

/// Entry point for `womkf verify --out DIR`.
pub fn run(dir: &Path) -> Result<(), Failure> {
    if !dir.is_dir() {
        return Err(Failure::Input(format!(
            "output directory {} does not exist",
            dir.display()
        )));
    }
    let map = manifest_map(dir)?;
    let settings = rebuild_settings(&map)?;
    println!(
        "verifying {} against a fresh {} run",
        dir.display(),
        settings.command
    );

    let mut failures = Vec::new();
    verify_fixpoints(dir, &settings, &mut failures)?;
    verify_mse(dir, &settings, &mut failures)?;
    verify_trace(dir, &settings, &mut failures)?;
    verify_coverage(dir, &settings, &mut failures)?;
    verify_compare(dir, &settings, &mut failures)?;
    verify_trajectory(dir, &settings, &mut failures)?;

    if failures.is_empty() {
        println!("all checks passed");
        Ok(())
    } else {
        for failure in &failures {
            eprintln!("failed: {failure}");
        }
        Err(Failure::Internal(format!(
            "{} verification check(s) failed",
            failures.len()
        )))
    }
}
