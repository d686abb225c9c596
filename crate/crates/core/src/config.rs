//! Line-based experiment configuration.
//!
//! ```text
//! # comment
//! experiment = A1
//! base_seed = 7
//! extra.refine = 50
//! ```

use std::collections::BTreeMap;
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub experiment: String,
    pub base_seed: u64,
    pub replicas: usize,
    pub dt: f64,
    pub dx: f64,
    pub bandwidth: f64,
    pub lambda_floor: f64,
    pub exit_level: f64,
    pub u_max: f64,
    pub xi: f64,
    /// Experiment-specific overrides, stored without the `extra.` prefix.
    pub extra: BTreeMap<String, String>,
}

pub const DEFAULT_DT: f64 = 1e-4;
pub const DEFAULT_LAMBDA_FLOOR: f64 = 1e-3;
pub const DEFAULT_REPLICAS: usize = 10_000;

impl ExperimentConfig {
    /// Defaults for everything but the experiment id.
    pub fn new(experiment: impl Into<String>) -> Self {
        let bandwidth = DEFAULT_DT.sqrt();
        Self {
            experiment: experiment.into(),
            base_seed: 1,
            replicas: DEFAULT_REPLICAS,
            dt: DEFAULT_DT,
            dx: bandwidth,
            bandwidth,
            lambda_floor: DEFAULT_LAMBDA_FLOOR,
            exit_level: 5.0,
            u_max: 5.0,
            xi: 1.0,
            extra: BTreeMap::new(),
        }
    }

    /// Parses `extra.<key>`, falling back to `default` when absent.
    pub fn extra_or<T: FromStr>(&self, key: &str, default: T) -> Result<T> {
        match self.extra.get(key) {
            None => Ok(default),
            Some(raw) => raw.parse().map_err(|_| Error::Config {
                line: 0,
                key: format!("extra.{key}"),
                message: format!("cannot parse `{raw}`"),
            }),
        }
    }
}

fn config_err(line: usize, key: &str, message: impl Into<String>) -> Error {
    Error::Config {
        line,
        key: key.to_string(),
        message: message.into(),
    }
}

fn parse_value<T: FromStr>(line: usize, key: &str, raw: &str) -> Result<T> {
    raw.parse()
        .map_err(|_| config_err(line, key, format!("malformed value `{raw}`")))
}

fn positive(line: usize, key: &str, raw: &str) -> Result<f64> {
    let v: f64 = parse_value(line, key, raw)?;
    if !(v > 0.0) || !v.is_finite() {
        return Err(config_err(line, key, format!("must be a positive finite number (got {raw})")));
    }
    Ok(v)
}

pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::new("");
    let mut seen: BTreeMap<String, usize> = BTreeMap::new();
    let mut bandwidth_set = false;
    let mut dx_set = false;

    for (idx, raw_line) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw_line.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let Some((key, value)) = content.split_once('=') else {
            return Err(config_err(line, content, "expected `key = value`"));
        };
        let (key, value) = (key.trim(), value.trim());
        if key.is_empty() {
            return Err(config_err(line, "", "empty key"));
        }
        if value.is_empty() {
            return Err(config_err(line, key, "empty value"));
        }
        if let Some(first) = seen.insert(key.to_string(), line) {
            return Err(config_err(line, key, format!("duplicate key (first set on line {first})")));
        }
        match key {
            "experiment" => cfg.experiment = value.to_string(),
            "base_seed" => cfg.base_seed = parse_value(line, key, value)?,
            "replicas" => {
                cfg.replicas = parse_value(line, key, value)?;
                if cfg.replicas == 0 {
                    return Err(config_err(line, key, "must be at least 1"));
                }
            }
            "dt" => cfg.dt = positive(line, key, value)?,
            "dx" => {
                cfg.dx = positive(line, key, value)?;
                dx_set = true;
            }
            "bandwidth" => {
                cfg.bandwidth = positive(line, key, value)?;
                bandwidth_set = true;
            }
            "lambda_floor" => cfg.lambda_floor = positive(line, key, value)?,
            "exit_level" => cfg.exit_level = positive(line, key, value)?,
            "u_max" => cfg.u_max = positive(line, key, value)?,
            "xi" => cfg.xi = positive(line, key, value)?,
            _ => match key.strip_prefix("extra.") {
                Some(name) if !name.is_empty() => {
                    cfg.extra.insert(name.to_string(), value.to_string());
                }
                _ => return Err(config_err(line, key, "unknown key")),
            },
        }
    }

    if cfg.experiment.is_empty() {
        return Err(config_err(0, "experiment", "experiment id required"));
    }
    if !bandwidth_set {
        cfg.bandwidth = cfg.dt.sqrt();
    }
    if !dx_set {
        cfg.dx = cfg.bandwidth;
    }
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_fill_in() {
        let cfg = parse_config("experiment = A1\nbase_seed = 7").unwrap();
        assert_eq!(cfg.experiment, "A1");
        assert_eq!(cfg.base_seed, 7);
        assert_eq!(cfg.replicas, 10_000);
        assert_eq!(cfg.dt, 1e-4);
        assert_eq!(cfg.bandwidth, 1e-2);
        assert_eq!(cfg.dx, 1e-2);
        assert_eq!(cfg.lambda_floor, 1e-3);
        assert_eq!(cfg.xi, 1.0);
    }

    #[test]
    fn bandwidth_follows_dt() {
        let cfg = parse_config("experiment = A7\ndt = 4e-4").unwrap();
        assert!((cfg.bandwidth - 0.02).abs() < 1e-15);
        assert_eq!(cfg.dx, cfg.bandwidth);
    }

    #[test]
    fn negative_dt_names_key_and_line() {
        let err = parse_config("experiment = A1\ndt = -1").unwrap_err();
        match err {
            Error::Config { line, key, .. } => {
                assert_eq!(line, 2);
                assert_eq!(key, "dt");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn empty_input_needs_experiment() {
        let err = parse_config("").unwrap_err();
        assert!(err.to_string().contains("experiment id required"));
    }

    #[test]
    fn comments_and_extra() {
        let text = "# header\nexperiment = A8  # trailing\n\nextra.refine = 50\n";
        let cfg = parse_config(text).unwrap();
        assert_eq!(cfg.extra_or("refine", 100usize).unwrap(), 50);
        assert_eq!(cfg.extra_or("absent", 3.5).unwrap(), 3.5);
    }

    #[test]
    fn rejects_unknown_duplicate_and_malformed() {
        assert!(matches!(parse_config("experiment = A1\nfoo = 1"), Err(Error::Config { line: 2, .. })));
        assert!(matches!(parse_config("experiment = A1\nexperiment = A2"), Err(Error::Config { line: 2, .. })));
        assert!(matches!(parse_config("experiment = A1\nreplicas = ten"), Err(Error::Config { line: 2, .. })));
        assert!(matches!(parse_config("experiment = A1\nreplicas = 0"), Err(Error::Config { line: 2, .. })));
        assert!(matches!(parse_config("experiment A1"), Err(Error::Config { line: 1, .. })));
    }
}
