//! Model parameters and their validation.

use std::collections::BTreeMap;

use crate::error::{Error, Result, Violation};

/// Every rate and count of the repairable-node PBFT model.
///
/// The node total `N = 3n + 1` is always derived from `n`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SystemParams {
    /// Fault-tolerance parameter.
    pub n: usize,
    /// Per-node failure rate.
    pub theta: f64,
    /// Per-node repair rate.
    pub mu: f64,
    /// Per-node voting rate.
    pub gamma: f64,
    /// Per-node approval probability.
    pub p: f64,
    /// Block-pegging / orphan-rollback rate.
    pub beta: f64,
    /// External transaction arrival rate.
    pub lambda: f64,
    /// Transactions per block.
    pub b: usize,
}

pub const FIELDS: [&str; 8] = ["n", "theta", "mu", "gamma", "p", "beta", "lambda", "b"];

impl SystemParams {
    /// Validates a fully specified parameter set.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        n: usize,
        theta: f64,
        mu: f64,
        gamma: f64,
        p: f64,
        beta: f64,
        lambda: f64,
        b: usize,
    ) -> Result<Self> {
        let params = SystemParams {
            n,
            theta,
            mu,
            gamma,
            p,
            beta,
            lambda,
            b,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn total_nodes(&self) -> usize {
        3 * self.n + 1
    }

    pub fn q(&self) -> f64 {
        1.0 - self.p
    }

    pub fn violations(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        let mut bad = |field: &str, reason: &str| {
            out.push(Violation {
                field: field.to_string(),
                reason: reason.to_string(),
            })
        };
        if self.n < 1 {
            bad("n", "n must be at least 1");
        }
        if self.b < 1 {
            bad("b", "b must be at least 1");
        }
        for (name, value) in [
            ("theta", self.theta),
            ("mu", self.mu),
            ("lambda", self.lambda),
        ] {
            if !value.is_finite() {
                bad(name, "rate must be finite");
            } else if value < 0.0 {
                bad(name, "rate must be non-negative");
            }
        }
        for (name, value) in [("gamma", self.gamma), ("beta", self.beta)] {
            if !value.is_finite() {
                bad(name, "rate must be finite");
            } else if value <= 0.0 {
                bad(name, "rate must be positive");
            }
        }
        if !(0.0..=1.0).contains(&self.p) {
            bad("p", "p must lie in [0,1]");
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        let violations = self.violations();
        if violations.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidParams(violations))
        }
    }

    /// Returns these parameters as a name → value map (the inverse of
    /// [`validate_params`]).
    pub fn to_map(&self) -> BTreeMap<String, f64> {
        [
            ("n", self.n as f64),
            ("theta", self.theta),
            ("mu", self.mu),
            ("gamma", self.gamma),
            ("p", self.p),
            ("beta", self.beta),
            ("lambda", self.lambda),
            ("b", self.b as f64),
        ]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect()
    }

    /// Sets one named field, used by parameter sweeps.
    pub fn with_field(mut self, name: &str, value: f64) -> Result<Self> {
        match name {
            "n" => self.n = parse_count("n", value)?,
            "b" => self.b = parse_count("b", value)?,
            "theta" => self.theta = value,
            "mu" => self.mu = value,
            "gamma" => self.gamma = value,
            "p" => self.p = value,
            "beta" => self.beta = value,
            "lambda" => self.lambda = value,
            other => {
                return Err(Error::InvalidParams(vec![Violation {
                    field: other.to_string(),
                    reason: "unknown parameter".to_string(),
                }]))
            }
        }
        self.validate()?;
        Ok(self)
    }
}

fn parse_count(field: &str, value: f64) -> Result<usize> {
    if value.is_finite() && value.fract() == 0.0 && value >= 1.0 {
        Ok(value as usize)
    } else {
        Err(Error::InvalidParams(vec![Violation {
            field: field.to_string(),
            reason: format!("{field} must be an integer of at least 1"),
        }]))
    }
}

/// Builds validated parameters from a raw name → number map.
///
/// All violations are collected rather than stopping at the first one.
pub fn validate_params(raw: &BTreeMap<String, f64>) -> Result<SystemParams> {
    let mut violations = Vec::new();
    for name in raw.keys() {
        if !FIELDS.contains(&name.as_str()) {
            violations.push(Violation {
                field: name.clone(),
                reason: "unknown parameter".to_string(),
            });
        }
    }
    let mut get = |name: &str| match raw.get(name) {
        Some(v) => Some(*v),
        None => {
            violations.push(Violation {
                field: name.to_string(),
                reason: "missing".to_string(),
            });
            None
        }
    };
    let n = get("n");
    let theta = get("theta");
    let mu = get("mu");
    let gamma = get("gamma");
    let p = get("p");
    let beta = get("beta");
    let lambda = get("lambda");
    let b = get("b");

    let mut count = |field: &str, value: Option<f64>| -> usize {
        match value {
            Some(v) if v.is_finite() && v.fract() == 0.0 && v >= 1.0 => v as usize,
            Some(_) => {
                violations.push(Violation {
                    field: field.to_string(),
                    reason: format!("{field} must be an integer of at least 1"),
                });
                1
            }
            None => 1,
        }
    };
    let n = count("n", n);
    let b = count("b", b);

    let params = SystemParams {
        n,
        theta: theta.unwrap_or(0.0),
        mu: mu.unwrap_or(0.0),
        gamma: gamma.unwrap_or(1.0),
        p: p.unwrap_or(0.0),
        beta: beta.unwrap_or(1.0),
        lambda: lambda.unwrap_or(0.0),
        b,
    };
    for v in params.violations() {
        // Missing fields were already reported, so skip their placeholder values.
        if raw.contains_key(&v.field) && !violations.iter().any(|w| w.field == v.field) {
            violations.push(v);
        }
    }
    if violations.is_empty() {
        Ok(params)
    } else {
        Err(Error::InvalidParams(violations))
    }
}
