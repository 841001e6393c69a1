//! Run configuration: a flat TOML file plus `--set key=value` overrides.

use std::collections::BTreeMap;
use std::path::Path;

use pbft_markov::generators::rate_bound;
use pbft_markov::measures::{Method, SolverSettings};
use pbft_markov::params::FIELDS;
use pbft_markov::{validate_params, SystemParams};
use serde::Deserialize;

use crate::CliError;

/// Keys accepted in the config file, in output order.
pub const KEYS: [&str; 16] = [
    "n", "theta", "mu", "gamma", "p", "beta", "lambda", "b", "eps_r", "max_iter", "tol", "dim_cap",
    "method", "seed", "reps", "horizon",
];

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    n: Option<f64>,
    theta: Option<f64>,
    mu: Option<f64>,
    gamma: Option<f64>,
    p: Option<f64>,
    beta: Option<f64>,
    lambda: Option<f64>,
    b: Option<f64>,
    eps_r: Option<f64>,
    max_iter: Option<u64>,
    tol: Option<f64>,
    dim_cap: Option<u64>,
    method: Option<String>,
    seed: Option<u64>,
    reps: Option<u64>,
    horizon: Option<f64>,
}

/// A configuration with every default filled in.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub params: SystemParams,
    pub solver: SolverSettings,
    /// `None` leaves the choice to the subcommand.
    pub method: Option<Method>,
    pub seed: u64,
    pub reps: usize,
    /// Simulation horizon; defaults to 10⁶ mean holding times at the
    /// fastest possible rate.
    pub horizon: f64,
}

impl RunConfig {
    /// Reads `path` (if any), applies overrides, validates and resolves.
    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Self, CliError> {
        let mut table: toml::Table = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| CliError::Input(format!("cannot read config {}: {e}", p.display())))?;
                text.parse()
                    .map_err(|e: toml::de::Error| CliError::Input(format!("config: {}", one_line(&e.to_string()))))?
            }
            None => toml::Table::new(),
        };
        for item in overrides {
            let (key, value) = item
                .split_once('=')
                .ok_or_else(|| CliError::Input(format!("override '{item}' is not key=value")))?;
            let key = key.trim();
            let value = value.trim();
            let parsed = if key == "method" {
                toml::Value::String(value.to_string())
            } else if let Ok(i) = value.parse::<i64>() {
                toml::Value::Integer(i)
            } else if let Ok(f) = value.parse::<f64>() {
                toml::Value::Float(f)
            } else {
                return Err(CliError::Input(format!("override '{item}' has a non-numeric value")));
            };
            table.insert(key.to_string(), parsed);
        }
        let raw: RawConfig = toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| CliError::Input(format!("config: {}", one_line(&e.to_string()))))?;
        Self::resolve(raw)
    }

    fn resolve(raw: RawConfig) -> Result<Self, CliError> {
        let values = [raw.n, raw.theta, raw.mu, raw.gamma, raw.p, raw.beta, raw.lambda, raw.b];
        let map: BTreeMap<String, f64> = FIELDS
            .iter()
            .zip(values)
            .filter_map(|(k, v)| v.map(|v| (k.to_string(), v)))
            .collect();
        let params = validate_params(&map)?;
        let defaults = SolverSettings::default();
        let solver = SolverSettings {
            eps_r: raw.eps_r.unwrap_or(defaults.eps_r),
            max_iter: raw.max_iter.map_or(defaults.max_iter, |v| v as usize),
            tol: raw.tol.unwrap_or(defaults.tol),
            dim_cap: raw.dim_cap.map_or(defaults.dim_cap, |v| v as usize),
        };
        if !(solver.eps_r > 0.0) || !(solver.tol > 0.0) || solver.max_iter == 0 || solver.dim_cap == 0 {
            return Err(CliError::Input(
                "eps_r and tol must be positive, max_iter and dim_cap at least 1".into(),
            ));
        }
        let method = raw.method.as_deref().map(str::parse).transpose()?;
        let horizon = raw.horizon.unwrap_or(1e6 / rate_bound(&params));
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(CliError::Input("horizon must be positive".into()));
        }
        let reps = raw.reps.unwrap_or(100_000) as usize;
        if reps == 0 {
            return Err(CliError::Input("reps must be at least 1".into()));
        }
        Ok(RunConfig {
            params,
            solver,
            method,
            seed: raw.seed.unwrap_or(1),
            reps,
            horizon,
        })
    }

    pub fn method_or(&self, default: Method) -> Method {
        self.method.unwrap_or(default)
    }

    /// The same configuration with one model parameter replaced.
    pub fn with_param(&self, name: &str, value: f64) -> Result<Self, CliError> {
        let params = self.params.with_field(name, value)?;
        Ok(RunConfig { params, ..self.clone() })
    }

    /// Resolved settings as ordered `(key, value)` pairs.
    pub fn entries(&self, method: Method) -> Vec<(&'static str, ConfigValue)> {
        use ConfigValue::*;
        let p = &self.params;
        vec![
            ("n", Int(p.n as u64)),
            ("theta", Float(p.theta)),
            ("mu", Float(p.mu)),
            ("gamma", Float(p.gamma)),
            ("p", Float(p.p)),
            ("beta", Float(p.beta)),
            ("lambda", Float(p.lambda)),
            ("b", Int(p.b as u64)),
            ("eps_r", Float(self.solver.eps_r)),
            ("max_iter", Int(self.solver.max_iter as u64)),
            ("tol", Float(self.solver.tol)),
            ("dim_cap", Int(self.solver.dim_cap as u64)),
            ("method", Text(method.as_str().to_string())),
            ("seed", Int(self.seed)),
            ("reps", Int(self.reps as u64)),
            ("horizon", Float(self.horizon)),
        ]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ConfigValue {
    Int(u64),
    Float(f64),
    Text(String),
}

fn one_line(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: [&str; 8] = [
        "n=1", "theta=0.1", "mu=0.2", "gamma=0.5", "p=0.9", "beta=0.2", "lambda=0.05", "b=2",
    ];

    fn base() -> Vec<String> {
        BASE.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn defaults_are_filled() {
        let c = RunConfig::load(None, &base()).unwrap();
        assert_eq!(c.solver, SolverSettings::default());
        assert_eq!(c.reps, 100_000);
        assert_eq!(c.seed, 1);
        assert!(c.method.is_none());
        assert_eq!(c.entries(Method::ExactPh).len(), KEYS.len());
        for ((k, _), key) in c.entries(Method::ExactPh).iter().zip(KEYS) {
            assert_eq!(*k, key);
        }
    }

    #[test]
    fn unknown_key_is_rejected() {
        let mut o = base();
        o.push("nu=3".into());
        let e = RunConfig::load(None, &o).unwrap_err();
        assert!(e.to_string().contains("nu"), "{e}");
    }

    #[test]
    fn missing_parameters_are_listed() {
        let e = RunConfig::load(None, &base()[..6]).unwrap_err();
        let msg = e.to_string();
        assert!(msg.contains("lambda") && msg.contains("b"), "{msg}");
    }

    #[test]
    fn file_and_overrides_merge() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.toml");
        std::fs::write(
            &path,
            "n = 1\ntheta = 0.1\nmu = 0.2\ngamma = 0.5\np = 0.9\nbeta = 0.2\nlambda = 0.05\nb = 2\nmethod = \"rate-approx\"\n",
        )
        .unwrap();
        let c = RunConfig::load(Some(&path), &["b=3".to_string()]).unwrap();
        assert_eq!(c.params.b, 3);
        assert_eq!(c.method, Some(Method::RateApprox));
    }
}
