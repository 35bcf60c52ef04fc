//! Rendering: significant-digit formatting, CSV emission, the run
//! manifest, and the human-readable stdout summaries.
//!
//! CSV numbers carry 12 significant digits (trailing zeros trimmed); the
//! manifest stores parameters in shortest-roundtrip form so `verify` can
//! reconstruct the run bit-exactly. Row order is deterministic: setup,
//! then agent, then step.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use womkf::experiments::{
    AgentComparison, CoverageReport, ExperimentReport, VarianceTrace,
};
use womkf::model::Trajectory;
use womkf::riccati::FixedPointReport;

use crate::settings::Settings;
use crate::Failure;

/// Render with 12 significant digits, trimming trailing zeros. Magnitudes
/// far from 1 switch to scientific notation.
pub fn fmt_sig(x: f64) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    if !x.is_finite() {
        return format!("{x}");
    }
    let mag = x.abs().log10().floor() as i32;
    if (-4..=11).contains(&mag) {
        let decimals = (11 - mag).max(0) as usize;
        let s = format!("{:.*}", decimals, x);
        if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s
        }
    } else {
        let s = format!("{:.11e}", x);
        // trim trailing zeros in the mantissa: 1.20000000000e-13 -> 1.2e-13
        match s.split_once('e') {
            Some((mant, exp)) if mant.contains('.') => {
                let mant = mant.trim_end_matches('0').trim_end_matches('.');
                format!("{mant}e{exp}")
            }
            _ => s,
        }
    }
}

/// Seconds since the Unix epoch, for the manifest.
fn unix_timestamp() -> u64 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

fn write_file(path: &Path, body: &str) -> Result<(), Failure> {
    std::fs::write(path, body)
        .map_err(|err| Failure::Internal(format!("cannot write {}: {err}", path.display())))
}

/// Create the output directory and write the run manifest into it.
/// Returns the directory path for the CSV writers.
pub fn prepare_out_dir(settings: &Settings) -> Result<Option<PathBuf>, Failure> {
    let Some(dir) = &settings.out else {
        return Ok(None);
    };
    std::fs::create_dir_all(dir)
        .map_err(|err| Failure::Internal(format!("cannot create {}: {err}", dir.display())))?;
    let manifest = render_manifest(settings);
    write_file(&dir.join("manifest.txt"), &manifest)?;
    Ok(Some(dir.clone()))
}

/// The run manifest: enough `key=value` lines to reproduce the run exactly.
/// Parameters use shortest-roundtrip formatting (`{:?}`), not the 12-digit
/// CSV rendering, so re-parsing loses nothing.
pub fn render_manifest(settings: &Settings) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "command={}", settings.command);
    let _ = writeln!(out, "version={}", env!("CARGO_PKG_VERSION"));
    let _ = writeln!(out, "timestamp_unix={}", unix_timestamp());
    let p = &settings.params;
    let _ = writeln!(out, "a={:?}", p.a);
    let _ = writeln!(out, "q={:?}", p.q);
    let s_list = p
        .s
        .iter()
        .map(|v| format!("{v:?}"))
        .collect::<Vec<_>>()
        .join(",");
    let _ = writeln!(out, "s={s_list}");
    let _ = writeln!(out, "m={}", p.num_agents());
    let _ = writeln!(out, "x0={:?}", p.prior_mean);
    let _ = writeln!(out, "p0={:?}", p.prior_var);
    let _ = writeln!(out, "K={}", settings.horizon);
    let _ = writeln!(out, "burn_in={}", settings.burn_in);
    let _ = writeln!(out, "tol={:?}", settings.tol);
    let setups = settings
        .setups
        .iter()
        .map(|s| s.label().to_ascii_lowercase())
        .collect::<Vec<_>>()
        .join(",");
    let _ = writeln!(out, "setups={setups}");
    match settings.command {
        "simulate" => {
            let _ = writeln!(out, "seed={}", settings.sim_seed);
            let _ = writeln!(out, "seed_source={}", settings.seed_source.label());
        }
        _ => {
            let _ = writeln!(out, "seeds={}", crate::settings::seeds_spec(&settings.seeds));
        }
    }
    if settings.command == "trace" {
        let inits = settings
            .inits
            .iter()
            .map(|v| format!("{v:?}"))
            .collect::<Vec<_>>()
            .join(",");
        let _ = writeln!(out, "inits={inits}");
    }
    if settings.command == "coverage" {
        let _ = writeln!(out, "agent={}", settings.agent);
    }
    if let Some(dir) = &settings.out {
        let _ = writeln!(out, "out={}", dir.display());
    }
    out
}

/// `fixpoints.csv`: one row per (setup, agent).
pub fn write_fixpoints_csv(dir: &Path, reports: &[&FixedPointReport]) -> Result<PathBuf, Failure> {
    let mut body = String::from("setup,agent,p_inf,alpha_inf,r_inf,p_post_inf\n");
    for report in reports {
        for a in &report.agents {
            let _ = writeln!(
                body,
                "{},{},{},{},{},{}",
                report.setup,
                a.agent,
                fmt_sig(a.pred_var),
                fmt_sig(a.gain),
                fmt_sig(a.eq_noise_var),
                fmt_sig(a.post_var)
            );
        }
    }
    let path = dir.join("fixpoints.csv");
    write_file(&path, &body)?;
    Ok(path)
}

/// `mse.csv`: one row per (setup, agent).
pub fn write_mse_csv(dir: &Path, report: &ExperimentReport) -> Result<PathBuf, Failure> {
    let mut body = String::from("setup,agent,mse_pred,mse_post,stderr_pred,stderr_post\n");
    for setup in &report.setups {
        for a in &setup.agents {
            let _ = writeln!(
                body,
                "{},{},{},{},{},{}",
                setup.setup,
                a.agent,
                fmt_sig(a.mse_pred),
                fmt_sig(a.mse_post),
                fmt_sig(a.stderr_pred),
                fmt_sig(a.stderr_post)
            );
        }
    }
    let path = dir.join("mse.csv");
    write_file(&path, &body)?;
    Ok(path)
}

/// `trace.csv`: one row per (setup, agent, step, initial condition).
pub fn write_trace_csv(dir: &Path, traces: &[VarianceTrace]) -> Result<PathBuf, Failure> {
    let mut body = String::from("setup,agent,k,init_id,p_pred,gain,p_post\n");
    let mut setups: Vec<_> = traces.iter().map(|t| t.setup).collect();
    setups.dedup();
    for &setup in &setups {
        let of_setup: Vec<_> = traces.iter().filter(|t| t.setup == setup).collect();
        let m = of_setup[0].agents.len();
        let horizon = of_setup[0].agents[0].pred_vars.len();
        for agent in 0..m {
            for k in 0..horizon {
                for trace in &of_setup {
                    let at = &trace.agents[agent];
                    let _ = writeln!(
                        body,
                        "{},{},{},{},{},{},{}",
                        setup,
                        agent + 1,
                        k + 1,
                        trace.init_id,
                        fmt_sig(at.pred_vars[k]),
                        fmt_sig(at.gains[k]),
                        fmt_sig(at.post_vars[k])
                    );
                }
            }
        }
    }
    let path = dir.join("trace.csv");
    write_file(&path, &body)?;
    Ok(path)
}

/// `coverage.csv`: one row per (setup, interval width).
pub fn write_coverage_csv(dir: &Path, reports: &[CoverageReport]) -> Result<PathBuf, Failure> {
    let mut body = String::from("setup,agent,n_sigma,coverage\n");
    for report in reports {
        for (n_sigma, value) in [(1, report.one_sigma), (3, report.three_sigma)] {
            let _ = writeln!(
                body,
                "{},{},{},{}",
                report.setup,
                report.agent,
                n_sigma,
                fmt_sig(value)
            );
        }
    }
    let path = dir.join("coverage.csv");
    write_file(&path, &body)?;
    Ok(path)
}

/// `compare.csv`: one row per agent, paired over identical trajectories.
pub fn write_compare_csv(dir: &Path, cmps: &[AgentComparison]) -> Result<PathBuf, Failure> {
    let mut body =
        String::from("agent,pp_mse_pred,wom_mse_pred,pp_mse_post,wom_mse_post,wom_post_improved\n");
    for c in cmps {
        let _ = writeln!(
            body,
            "{},{},{},{},{},{}",
            c.agent,
            fmt_sig(c.pp_mse_pred),
            fmt_sig(c.wom_mse_pred),
            fmt_sig(c.pp_mse_post),
            fmt_sig(c.wom_mse_post),
            u8::from(c.wom_improves_post())
        );
    }
    let path = dir.join("compare.csv");
    write_file(&path, &body)?;
    Ok(path)
}

/// `trajectory.csv`: the realized initial state (step 0, no noise columns)
/// followed by one row per step.
pub fn write_trajectory_csv(dir: &Path, traj: &Trajectory) -> Result<PathBuf, Failure> {
    let m = traj.injected_noise.first().map_or(0, |row| row.len());
    let mut header = String::from("k,state,process_noise");
    for i in 1..=m {
        let _ = write!(header, ",v{i}");
    }
    let mut body = header;
    body.push('\n');
    // Step 0 carries only the realized initial state; the noise cells stay
    // empty (process_noise plus one per agent).
    let _ = write!(body, "0,{}", fmt_sig(traj.initial_state));
    body.push_str(&",".repeat(m + 1));
    body.push('\n');
    for k in 0..traj.horizon() {
        let _ = write!(
            body,
            "{},{},{}",
            k + 1,
            fmt_sig(traj.states[k]),
            fmt_sig(traj.process_noise[k])
        );
        for v in &traj.injected_noise[k] {
            let _ = write!(body, ",{}", fmt_sig(*v));
        }
        body.push('\n');
    }
    let path = dir.join("trajectory.csv");
    write_file(&path, &body)?;
    Ok(path)
}

/// Print the stationary-variance table for one report.
pub fn print_fixpoint_table(report: &FixedPointReport) {
    println!(
        "{} stationary variances ({}, {} iterations, residual {:.2e}):",
        report.setup, report.method, report.iterations, report.max_rel_residual
    );
    println!(
        "  {:<6} {:>16} {:>16} {:>16} {:>16}",
        "agent", "p_inf", "alpha_inf", "r_inf", "p_post_inf"
    );
    for a in &report.agents {
        println!(
            "  {:<6} {:>16.10} {:>16.10} {:>16.10} {:>16.10}",
            a.agent, a.pred_var, a.gain, a.eq_noise_var, a.post_var
        );
    }
}

/// Print the Monte Carlo error table for one run.
pub fn print_mse_table(report: &ExperimentReport) {
    for setup in &report.setups {
        println!(
            "{} errors over {} seeds, K={} (burn-in {}):",
            setup.setup,
            report.config.seeds.len(),
            report.config.horizon,
            report.config.burn_in
        );
        println!(
            "  {:<6} {:>12} {:>12} {:>12} {:>12} {:>12} {:>12}",
            "agent", "mse_pred", "se", "p_inf", "mse_post", "se", "p_post_inf"
        );
        for (a, fp) in setup.agents.iter().zip(&setup.fixed_points.agents) {
            println!(
                "  {:<6} {:>12.6} {:>12.6} {:>12.6} {:>12.6} {:>12.6} {:>12.6}",
                a.agent, a.mse_pred, a.stderr_pred, fp.pred_var, a.mse_post, a.stderr_post,
                fp.post_var
            );
        }
    }
}

/// Print terminal trace values against their stationary targets.
pub fn print_trace_summary(traces: &[VarianceTrace], targets: &[&FixedPointReport]) {
    for trace in traces {
        let target = targets
            .iter()
            .find(|r| r.setup == trace.setup)
            .expect("targets cover every traced setup");
        println!(
            "{} trace from p={} ({} steps):",
            trace.setup,
            fmt_sig(trace.initial_pred_var),
            trace.agents[0].pred_vars.len()
        );
        for (at, fp) in trace.agents.iter().zip(&target.agents) {
            let last = *at.pred_vars.last().unwrap();
            println!(
                "  agent {}: final p_pred {:.10}, stationary {:.10}, gap {:.3e}",
                at.agent,
                last,
                fp.pred_var,
                (last - fp.pred_var).abs()
            );
        }
    }
}

/// Print interval-coverage results.
pub fn print_coverage_summary(reports: &[CoverageReport]) {
    for r in reports {
        println!(
            "{} agent {}: 1-sigma coverage {:.4}, 3-sigma coverage {:.4} ({} seeds)",
            r.setup,
            r.agent,
            r.one_sigma,
            r.three_sigma,
            r.per_seed.len()
        );
    }
}

/// Print the paired comparison per agent.
pub fn print_compare_summary(cmps: &[AgentComparison]) {
    println!(
        "  {:<6} {:>12} {:>12} {:>12} {:>12}  posterior winner",
        "agent", "pp_pred", "wom_pred", "pp_post", "wom_post"
    );
    for c in cmps {
        println!(
            "  {:<6} {:>12.6} {:>12.6} {:>12.6} {:>12.6}  {}",
            c.agent,
            c.pp_mse_pred,
            c.wom_mse_pred,
            c.pp_mse_post,
            c.wom_mse_post,
            if c.wom_improves_post() { "WoM" } else { "PP" }
        );
    }
}
