//! Run configuration: `key = value` files overridden by command-line flags.

use std::collections::BTreeMap;
use std::path::PathBuf;

use sha2::{Digest, Sha256};

use crate::distributions::JointStepLaw;
use crate::error::{Error, Result};
use crate::grid::GridSpec;
use crate::syntax::fmt_number;

pub const OUT_ENV: &str = "ITERLIL_OUT";
const DEFAULT_OUT: &str = "iterlil-out";

pub const KEYS: [&str; 12] = [
    "law", "seed", "reps", "horizon", "grid", "j", "step", "t_min", "u", "t_points", "out", "workers",
];

#[derive(Debug, Clone, PartialEq)]
pub struct McConfig {
    pub law: JointStepLaw,
    pub seed: u64,
    pub reps: usize,
    pub horizon: f64,
    pub grid: GridSpec,
    pub j: usize,
    pub step: f64,
    pub t_min: f64,
    pub u: Vec<f64>,
    /// Subcommand default applies when unset.
    pub t_points: Option<Vec<f64>>,
    pub out: PathBuf,
    pub workers: usize,
}

impl Default for McConfig {
    fn default() -> Self {
        McConfig {
            law: JointStepLaw::parse("exp_indep(1,1)").expect("default law"),
            seed: 0,
            reps: 100,
            horizon: 100.0,
            grid: GridSpec::default(),
            j: 1,
            step: 0.01,
            t_min: 20.0,
            u: vec![-0.2, -0.05, 0.05, 0.2],
            t_points: None,
            out: default_out(),
            workers: 1,
        }
    }
}

fn default_out() -> PathBuf {
    std::env::var_os(OUT_ENV).map(PathBuf::from).unwrap_or_else(|| PathBuf::from(DEFAULT_OUT))
}

/// Where a setting came from, for error messages.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Origin {
    Line(usize),
    Flag(String),
}

impl std::fmt::Display for Origin {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Origin::Line(n) => write!(f, "line {n}"),
            Origin::Flag(name) => write!(f, "--{name}"),
        }
    }
}

fn config_err(origin: &Origin, msg: impl Into<String>) -> Error {
    Error::Config {
        location: origin.to_string(),
        msg: msg.into(),
    }
}

/// Parses `key = value` lines; `#` starts a comment.
pub fn parse_config_text(text: &str) -> Result<Vec<(String, String, Origin)>> {
    let mut out: Vec<(String, String, Origin)> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let origin = Origin::Line(i + 1);
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| config_err(&origin, "expected `key = value`"))?;
        let key = key.trim();
        if !KEYS.contains(&key) {
            return Err(config_err(&origin, format!("unknown key `{key}`")));
        }
        if out.iter().any(|(k, _, _)| k == key) {
            return Err(config_err(&origin, format!("duplicate key `{key}`")));
        }
        out.push((key.to_string(), value.trim().to_string(), origin));
    }
    Ok(out)
}

fn parse_list(value: &str, origin: &Origin) -> Result<Vec<f64>> {
    let items: Vec<&str> = value.split(',').map(str::trim).collect();
    items
        .iter()
        .map(|s| {
            s.parse::<f64>()
                .ok()
                .filter(|x| x.is_finite())
                .ok_or_else(|| config_err(origin, format!("`{s}` is not a finite number")))
        })
        .collect()
}

fn parse_num<T: std::str::FromStr>(value: &str, origin: &Origin, what: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| config_err(origin, format!("expected {what}, got `{value}`")))
}

impl McConfig {
    /// Applies one setting, validating it.
    pub fn set(&mut self, key: &str, value: &str, origin: &Origin) -> Result<()> {
        match key {
            "law" => self.law = JointStepLaw::parse(value)?,
            "seed" => self.seed = parse_num(value, origin, "an unsigned 64-bit integer")?,
            "reps" => {
                self.reps = parse_num(value, origin, "a positive integer")?;
                if self.reps == 0 {
                    return Err(config_err(origin, "reps must be at least 1"));
                }
            }
            "horizon" => {
                self.horizon = parse_num(value, origin, "a real")?;
                if !(self.horizon.is_finite() && self.horizon > 0.0) {
                    return Err(config_err(origin, "horizon must be positive"));
                }
            }
            "grid" => self.grid = GridSpec::parse(value)?,
            "j" => {
                self.j = parse_num(value, origin, "a positive integer")?;
                if self.j == 0 {
                    return Err(config_err(origin, "j must be at least 1"));
                }
            }
            "step" => {
                self.step = parse_num(value, origin, "a real")?;
                if !(self.step.is_finite() && self.step > 0.0) {
                    return Err(config_err(origin, "step must be positive"));
                }
            }
            "t_min" => {
                self.t_min = parse_num(value, origin, "a real")?;
                if !(self.t_min.is_finite() && self.t_min >= 0.0) {
                    return Err(config_err(origin, "t_min must be nonnegative"));
                }
            }
            "u" => self.u = parse_list(value, origin)?,
            "t_points" => self.t_points = Some(parse_list(value, origin)?),
            "out" => self.out = PathBuf::from(value),
            "workers" => {
                self.workers = parse_num(value, origin, "a positive integer")?;
                if self.workers == 0 {
                    return Err(config_err(origin, "workers must be at least 1"));
                }
            }
            other => return Err(config_err(origin, format!("unknown key `{other}`"))),
        }
        Ok(())
    }

    /// Settings that determine results, one `key = value` per line, sorted.
    /// `out` and `workers` are excluded.
    pub fn canonical_text(&self) -> String {
        let join = |xs: &[f64]| xs.iter().map(|x| fmt_number(*x)).collect::<Vec<_>>().join(",");
        let mut m = BTreeMap::new();
        m.insert("law", self.law.to_string());
        m.insert("seed", self.seed.to_string());
        m.insert("reps", self.reps.to_string());
        m.insert("horizon", fmt_number(self.horizon));
        m.insert("grid", self.grid.to_string());
        m.insert("j", self.j.to_string());
        m.insert("step", fmt_number(self.step));
        m.insert("t_min", fmt_number(self.t_min));
        m.insert("u", join(&self.u));
        if let Some(p) = &self.t_points {
            m.insert("t_points", join(p));
        }
        m.iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }

    /// First 16 hex digits of the SHA-256 of [`McConfig::canonical_text`].
    pub fn fingerprint(&self) -> String {
        let digest = Sha256::digest(self.canonical_text().as_bytes());
        hex::encode(digest)[..16].to_string()
    }
}

/// Builds a config from optional file text and `(flag, value)` overrides.
pub fn parse_config(file_text: Option<&str>, flags: &[(String, String)]) -> Result<McConfig> {
    let mut cfg = McConfig::default();
    if let Some(text) = file_text {
        for (key, value, origin) in parse_config_text(text)? {
            cfg.set(&key, &value, &origin)?;
        }
    }
    for (flag, value) in flags {
        let key = flag.replace('-', "_");
        let origin = Origin::Flag(flag.clone());
        if !KEYS.contains(&key.as_str()) {
            return Err(config_err(&origin, "unknown flag"));
        }
        cfg.set(&key, value, &origin)?;
    }
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn flags(pairs: &[(&str, &str)]) -> Vec<(String, String)> {
        pairs.iter().map(|(a, b)| (a.to_string(), b.to_string())).collect()
    }

    #[test]
    fn flags_override_file() {
        let cfg = parse_config(Some("law = exp_indep(1.0,1.0)\nseed = 7 # comment\n"), &flags(&[("seed", "42")])).unwrap();
        assert_eq!(cfg.seed, 42);
        assert_eq!(cfg.law.to_string(), "exp_indep(1.0,1.0)");
    }

    #[test]
    fn errors_carry_location() {
        assert!(matches!(
            parse_config(Some("law = exp_indep(-1,1)"), &[]),
            Err(Error::InvalidParameter(_))
        ));
        match parse_config(Some("\n\nbogus = 1\n"), &[]) {
            Err(Error::Config { location, .. }) => assert_eq!(location, "line 3"),
            other => panic!("{other:?}"),
        }
        match parse_config(None, &flags(&[("seed", "abc")])) {
            Err(Error::Config { location, .. }) => assert_eq!(location, "--seed"),
            other => panic!("{other:?}"),
        }
        assert!(parse_config(Some("seed = 1\nseed = 2"), &[]).is_err());
        assert!(parse_config(Some("reps"), &[]).is_err());
        assert!(parse_config(None, &flags(&[("reps", "0")])).is_err());
    }

    #[test]
    fn canonical_round_trip() {
        let cfg = parse_config(
            Some("law = eta_eq_xi(exp(2))\ngrid = proof_grid\nu = 0.1, -0.1\nt_points = 10,100\nworkers = 8\n"),
            &flags(&[("horizon", "1e3")]),
        )
        .unwrap();
        let again = parse_config(Some(&cfg.canonical_text()), &[]).unwrap();
        assert_eq!(again.fingerprint(), cfg.fingerprint());
        assert_eq!(again.canonical_text(), cfg.canonical_text());
        let mut other = cfg.clone();
        other.workers = 1;
        other.out = PathBuf::from("elsewhere");
        assert_eq!(other.fingerprint(), cfg.fingerprint());
        other.seed += 1;
        assert_ne!(other.fingerprint(), cfg.fingerprint());
    }
}
