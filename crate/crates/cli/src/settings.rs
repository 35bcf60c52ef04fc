//! Flag/config resolution: defaults, config-file parsing, and validation.
//!
//! Precedence: built-in defaults (the reference setting a=0.95, q=1,
//! s=[1,1,1], x0=25, p0=3, K=1000) < config-file values < command-line
//! flags. Config files are flat `key=value` lines; `#` starts a comment;
//! lists are comma-separated.

use std::collections::HashMap;
use std::path::PathBuf;

use womkf::chain::Setup;
use womkf::experiments::ExperimentConfig;
use womkf::model::ModelParams;

use crate::Failure;

/// Where the simulation seed came from, recorded in the manifest.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SeedSource {
    /// Passed via `--seed` or config file.
    Given,
    /// Drawn from OS entropy because none was given.
    Entropy,
}

impl SeedSource {
    pub fn label(self) -> &'static str {
        match self {
            SeedSource::Given => "given",
            SeedSource::Entropy => "entropy",
        }
    }
}

/// Raw option values before resolution, as collected from the command line.
#[derive(Debug, Default, Clone, clap::Args)]
pub struct CommonArgs {
    /// Config file with key=value lines (# comments); flags override it
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// State transition coefficient, in (-1,1)
    #[arg(long, allow_hyphen_values = true, value_name = "REAL")]
    pub a: Option<String>,
    /// Process-noise variance, > 0
    #[arg(long, allow_hyphen_values = true, value_name = "REAL")]
    pub q: Option<String>,
    /// Injected-noise variances, comma-separated, agent 1 first
    #[arg(long, allow_hyphen_values = true, value_name = "LIST")]
    pub s: Option<String>,
    /// Number of agents (with --s, lengths must agree; alone, s = ones)
    #[arg(long, allow_hyphen_values = true, value_name = "INT")]
    pub m: Option<String>,
    /// Initial state mean
    #[arg(long, allow_hyphen_values = true, value_name = "REAL")]
    pub x0: Option<String>,
    /// Initial state variance, > 0
    #[arg(long, allow_hyphen_values = true, value_name = "REAL")]
    pub p0: Option<String>,
    /// Steps per trajectory
    #[arg(long = "K", allow_hyphen_values = true, value_name = "INT")]
    pub horizon: Option<String>,
    /// Trajectory seeds: a range N:M (M exclusive), a comma list, or one value
    #[arg(long, allow_hyphen_values = true, value_name = "SPEC")]
    pub seeds: Option<String>,
    /// Single trajectory seed (simulate only; drawn from entropy when unset)
    #[arg(long, allow_hyphen_values = true, value_name = "INT")]
    pub seed: Option<String>,
    /// Information structure: pp, wom, or both
    #[arg(long, value_name = "NAME")]
    pub setup: Option<String>,
    /// Initial prediction variances for traces, comma-separated
    #[arg(long, allow_hyphen_values = true, value_name = "LIST")]
    pub inits: Option<String>,
    /// Steps to drop before accumulating errors
    #[arg(long = "burn-in", allow_hyphen_values = true, value_name = "INT")]
    pub burn_in: Option<String>,
    /// Solver tolerance (relative)
    #[arg(long, allow_hyphen_values = true, value_name = "REAL")]
    pub tol: Option<String>,
    /// Agent index for coverage (1-based; defaults to the last agent)
    #[arg(long, allow_hyphen_values = true, value_name = "INT")]
    pub agent: Option<String>,
    /// Directory to write CSV outputs and the run manifest into
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
}

/// Fully resolved, validated run settings.
#[derive(Debug, Clone)]
pub struct Settings {
    pub command: &'static str,
    pub params: ModelParams,
    pub horizon: usize,
    pub seeds: Vec<u64>,
    pub inits: Vec<f64>,
    pub setups: Vec<Setup>,
    pub burn_in: usize,
    pub tol: f64,
    pub agent: usize,
    pub sim_seed: u64,
    pub seed_source: SeedSource,
    pub out: Option<PathBuf>,
}

impl Settings {
    /// The experiment configuration this run drives.
    pub fn experiment_config(&self) -> ExperimentConfig {
        ExperimentConfig {
            params: self.params.clone(),
            horizon: self.horizon,
            seeds: self.seeds.clone(),
            initial_pred_vars: self.inits.clone(),
            setups: self.setups.clone(),
            burn_in: self.burn_in,
        }
    }
}

fn input<T>(msg: impl Into<String>) -> Result<T, Failure> {
    Err(Failure::Input(msg.into()))
}

/// Parse a config file body into a key -> value map. `#` comments, blank
/// lines, and surrounding whitespace are ignored.
fn parse_config_body(body: &str) -> Result<HashMap<String, String>, Failure> {
    const KNOWN: &[&str] = &[
        "a", "q", "s", "m", "x0", "p0", "K", "seeds", "seed", "setup", "inits", "burn-in",
        "burn_in", "tol", "agent",
    ];
    let mut map = HashMap::new();
    for (lineno, raw) in body.lines().enumerate() {
        let line = match raw.split_once('#') {
            Some((before, _)) => before,
            None => raw,
        }
        .trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return input(format!(
                "config line {} is not key=value: {raw:?}",
                lineno + 1
            ));
        };
        let key = key.trim();
        if !KNOWN.contains(&key) {
            return input(format!("unknown config key {key:?} on line {}", lineno + 1));
        }
        let key = if key == "burn-in" { "burn_in" } else { key };
        map.insert(key.to_string(), value.trim().to_string());
    }
    Ok(map)
}

fn parse_f64(field: &str, value: &str) -> Result<f64, Failure> {
    value
        .trim()
        .parse::<f64>()
        .map_err(|_| Failure::Input(format!("{field} must be a number, got {value:?}")))
}

fn parse_usize(field: &str, value: &str) -> Result<usize, Failure> {
    value
        .trim()
        .parse::<usize>()
        .map_err(|_| Failure::Input(format!("{field} must be a nonnegative integer, got {value:?}")))
}

fn parse_u64(field: &str, value: &str) -> Result<u64, Failure> {
    value
        .trim()
        .parse::<u64>()
        .map_err(|_| Failure::Input(format!("{field} must be a nonnegative integer, got {value:?}")))
}

fn parse_f64_list(field: &str, value: &str) -> Result<Vec<f64>, Failure> {
    value
        .split(',')
        .map(|tok| parse_f64(field, tok))
        .collect()
}

/// Seeds: `N:M` (half-open range), a comma list, or a single integer.
pub fn parse_seeds(spec: &str) -> Result<Vec<u64>, Failure> {
    let spec = spec.trim();
    if spec.is_empty() {
        return input("seeds must not be empty");
    }
    if let Some((lo, hi)) = spec.split_once(':') {
        let lo = parse_u64("seeds range start", lo)?;
        let hi = parse_u64("seeds range end", hi)?;
        if hi <= lo {
            return input(format!("seeds range {spec:?} is empty (end is exclusive)"));
        }
        Ok((lo..hi).collect())
    } else {
        spec.split(',').map(|tok| parse_u64("seeds", tok)).collect()
    }
}

fn parse_setups(value: &str) -> Result<Vec<Setup>, Failure> {
    match value.trim().to_ascii_lowercase().as_str() {
        "" => input("no setup selected"),
        "pp" => Ok(vec![Setup::Pp]),
        "wom" => Ok(vec![Setup::Wom]),
        "both" => Ok(vec![Setup::Pp, Setup::Wom]),
        other => input(format!("setup must be pp, wom, or both, got {other:?}")),
    }
}

/// Resolve defaults, config file, and flags into validated [`Settings`].
pub fn resolve(command: &'static str, args: &CommonArgs) -> Result<Settings, Failure> {
    let config = match &args.config {
        Some(path) => {
            let body = std::fs::read_to_string(path).map_err(|err| {
                Failure::Input(format!("cannot read config {}: {err}", path.display()))
            })?;
            parse_config_body(&body)?
        }
        None => HashMap::new(),
    };
    // flag if set, else config-file value, else None
    let pick = |flag: &Option<String>, key: &str| -> Option<String> {
        flag.clone().or_else(|| config.get(key).cloned())
    };

    let a = match pick(&args.a, "a") {
        Some(v) => parse_f64("a", &v)?,
        None => 0.95,
    };
    let q = match pick(&args.q, "q") {
        Some(v) => parse_f64("q", &v)?,
        None => 1.0,
    };
    let x0 = match pick(&args.x0, "x0") {
        Some(v) => parse_f64("x0", &v)?,
        None => 25.0,
    };
    let p0 = match pick(&args.p0, "p0") {
        Some(v) => parse_f64("p0", &v)?,
        None => 3.0,
    };
    let s_raw = pick(&args.s, "s");
    let m_raw = pick(&args.m, "m");
    let s = match (s_raw, m_raw) {
        (Some(s), Some(m)) => {
            let s = parse_f64_list("s", &s)?;
            let m = parse_usize("m", &m)?;
            if s.len() != m {
                return input(format!("m is {m} but s lists {} values", s.len()));
            }
            s
        }
        (Some(s), None) => parse_f64_list("s", &s)?,
        (None, Some(m)) => {
            let m = parse_usize("m", &m)?;
            if m == 0 {
                return input("m must be at least 1");
            }
            vec![1.0; m]
        }
        (None, None) => vec![1.0, 1.0, 1.0],
    };
    let params = ModelParams::new(a, q, x0, p0, s).map_err(Failure::from_error)?;
    let m = params.num_agents();

    let horizon = match pick(&args.horizon, "K") {
        Some(v) => {
            let k = parse_usize("K", &v)?;
            if k == 0 {
                return input("K must be at least 1");
            }
            k
        }
        None => 1000,
    };
    let burn_in = match pick(&args.burn_in, "burn_in") {
        Some(v) => parse_usize("burn-in", &v)?,
        None => 0,
    };
    if burn_in >= horizon {
        return input(format!("burn-in {burn_in} must be smaller than K {horizon}"));
    }
    let tol = match pick(&args.tol, "tol") {
        Some(v) => parse_f64("tol", &v)?,
        None => 1e-12,
    };
    if !(tol.is_finite() && tol > 0.0) {
        return input(format!("tol must be positive and finite, got {tol}"));
    }

    if command == "simulate" {
        if args.seeds.is_some() {
            return input("--seeds applies to ensemble commands; simulate takes --seed");
        }
    } else if args.seed.is_some() {
        return input("--seed applies to simulate; ensemble commands take --seeds");
    }
    let seeds = match pick(&args.seeds, "seeds") {
        Some(v) => parse_seeds(&v)?,
        None => (0..50).collect(),
    };
    let (sim_seed, seed_source) = match pick(&args.seed, "seed") {
        Some(v) => (parse_u64("seed", &v)?, SeedSource::Given),
        None => (rand::random::<u64>(), SeedSource::Entropy),
    };

    let setups = match pick(&args.setup, "setup") {
        Some(v) => parse_setups(&v)?,
        None => vec![Setup::Pp, Setup::Wom],
    };
    let inits = match pick(&args.inits, "inits") {
        Some(v) => {
            let inits = parse_f64_list("inits", &v)?;
            if inits.is_empty() {
                return input("inits must list at least one value");
            }
            for &p in &inits {
                if !(p.is_finite() && p > 0.0) {
                    return input(format!("inits must be positive and finite, got {p}"));
                }
            }
            inits
        }
        None => vec![0.1, 3.7075, 50.0],
    };
    let agent = match pick(&args.agent, "agent") {
        Some(v) => {
            let agent = parse_usize("agent", &v)?;
            if agent == 0 || agent > m {
                return input(format!("agent must lie in 1..={m}, got {agent}"));
            }
            agent
        }
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
        out: args.out.clone(),
    };
    settings
        .experiment_config()
        .validate()
        .map_err(Failure::from_error)?;
    Ok(settings)
}

/// Canonical text for a seed list: a contiguous run renders as `N:M`,
/// anything else as a comma list.
pub fn seeds_spec(seeds: &[u64]) -> String {
    let contiguous = seeds.len() > 1
        && seeds
            .windows(2)
            .all(|w| w[1] == w[0].wrapping_add(1));
    if contiguous {
        format!("{}:{}", seeds[0], seeds[seeds.len() - 1] + 1)
    } else {
        seeds
            .iter()
            .map(|s| s.to_string())
            .collect::<Vec<_>>()
            .join(",")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn args() -> CommonArgs {
        CommonArgs::default()
    }

    #[test]
    fn defaults_resolve_to_the_reference_setting() {
        let st = resolve("mse", &args()).unwrap();
        assert_eq!(st.params.a, 0.95);
        assert_eq!(st.params.q, 1.0);
        assert_eq!(st.params.s, vec![1.0, 1.0, 1.0]);
        assert_eq!(st.params.prior_mean, 25.0);
        assert_eq!(st.params.prior_var, 3.0);
        assert_eq!(st.horizon, 1000);
        assert_eq!(st.seeds.len(), 50);
        assert_eq!(st.seeds[0], 0);
        assert_eq!(st.seeds[49], 49);
        assert_eq!(st.setups, vec![Setup::Pp, Setup::Wom]);
        assert_eq!(st.inits, vec![0.1, 3.7075, 50.0]);
        assert_eq!(st.burn_in, 0);
        assert_eq!(st.tol, 1e-12);
        assert_eq!(st.agent, 3);
    }

    #[test]
    fn flags_override_config_values() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.cfg");
        std::fs::write(&path, "a=0.5 # comment\nq=2\ns=1,2\n\n# full-line comment\nK=77\n")
            .unwrap();
        let mut a = args();
        a.config = Some(path);
        a.q = Some("3".to_string());
        let st = resolve("mse", &a).unwrap();
        assert_eq!(st.params.a, 0.5); // from config
        assert_eq!(st.params.q, 3.0); // flag wins
        assert_eq!(st.params.s, vec![1.0, 2.0]);
        assert_eq!(st.horizon, 77);
    }

    #[test]
    fn bad_values_name_the_field() {
        let mut a = args();
        a.a = Some("1.5".to_string());
        let err = resolve("mse", &a).unwrap_err();
        assert!(matches!(&err, Failure::Input(msg) if msg.contains("a must lie in")));

        let mut a = args();
        a.q = Some("0".to_string());
        let err = resolve("mse", &a).unwrap_err();
        assert!(matches!(&err, Failure::Input(msg) if msg.contains("q must be positive")));

        let mut a = args();
        a.config = Some(PathBuf::from("/definitely/missing.cfg"));
        let err = resolve("mse", &a).unwrap_err();
        assert!(matches!(&err, Failure::Input(msg) if msg.contains("cannot read config")));

        let mut a = args();
        a.setup = Some(String::new());
        let err = resolve("mse", &a).unwrap_err();
        assert!(matches!(&err, Failure::Input(msg) if msg.contains("no setup selected")));

        let mut a = args();
        a.m = Some("2".to_string());
        a.s = Some("1,1,1".to_string());
        let err = resolve("mse", &a).unwrap_err();
        assert!(matches!(&err, Failure::Input(msg) if msg.contains("m is 2 but s lists 3")));
    }

    #[test]
    fn seed_spec_forms() {
        assert_eq!(parse_seeds("0:50").unwrap().len(), 50);
        assert_eq!(parse_seeds("3,5,9").unwrap(), vec![3, 5, 9]);
        assert_eq!(parse_seeds("7").unwrap(), vec![7]);
        assert!(parse_seeds("5:5").is_err());
        assert!(parse_seeds("x").is_err());
        assert_eq!(seeds_spec(&[0, 1, 2, 3]), "0:4");
        assert_eq!(seeds_spec(&[3, 5, 9]), "3,5,9");
        assert_eq!(seeds_spec(&[7]), "7");
    }

    #[test]
    fn m_alone_means_unit_noise_everywhere() {
        let mut a = args();
        a.m = Some("5".to_string());
        let st = resolve("fixpoints", &a).unwrap();
        assert_eq!(st.params.s, vec![1.0; 5]);
        assert_eq!(st.agent, 5);
    }

    #[test]
    fn seed_flags_are_command_specific() {
        let mut a = args();
        a.seed = Some("1".to_string());
        assert!(resolve("mse", &a).is_err());
        assert!(resolve("simulate", &a).is_ok());

        let mut a = args();
        a.seeds = Some("0:3".to_string());
        assert!(resolve("simulate", &a).is_err());
        assert!(resolve("mse", &a).is_ok());
    }
}
