//! Run configuration loaded from JSON.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::catalog::{Overrides, Rulebook};
use crate::error::{Error, Result};
use crate::metrics::{stats::DEFAULT_RESAMPLES, DEFAULT_MISS_THRESHOLD};
use crate::proxy::{EvalOptions, Normalization, ProxyParams};
use crate::select::SelectorConfig;

/// Environment variable naming the default config file.
pub const CONFIG_ENV: &str = "RULERANK_CONFIG";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub epsilons: [f64; 4],
    pub scalarization_base: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub weighted_sum_weights: Option<Vec<f64>>,
    pub normalization: Normalization,
    /// JSON file of per-rule overrides, resolved relative to the config file.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rule_overrides: Option<PathBuf>,
    pub proxy: ProxyParams,
    pub miss_threshold: f64,
    pub bootstrap_resamples: usize,
}

impl Default for Config {
    fn default() -> Self {
        let sel = SelectorConfig::default();
        Config {
            epsilons: sel.epsilons,
            scalarization_base: sel.scalarization_base,
            weighted_sum_weights: None,
            normalization: Normalization::default(),
            rule_overrides: None,
            proxy: ProxyParams::default(),
            miss_threshold: DEFAULT_MISS_THRESHOLD,
            bootstrap_resamples: DEFAULT_RESAMPLES,
        }
    }
}

impl Config {
    pub fn from_json(bytes: &[u8]) -> Result<Config> {
        let cfg: Config = serde_json::from_slice(bytes)?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads `path`, resolving a relative overrides path against its directory.
    pub fn load(path: &Path) -> Result<Config> {
        let mut cfg = Config::from_json(&std::fs::read(path)?)?;
        if let (Some(rel), Some(dir)) = (cfg.rule_overrides.as_ref(), path.parent()) {
            if rel.is_relative() {
                cfg.rule_overrides = Some(dir.join(rel));
            }
        }
        Ok(cfg)
    }

    /// Explicit path first, then the environment variable, then defaults.
    pub fn resolve(explicit: Option<&Path>) -> Result<Config> {
        match explicit {
            Some(p) => Config::load(p),
            None => match std::env::var_os(CONFIG_ENV) {
                Some(p) if !p.is_empty() => Config::load(Path::new(&p)),
                _ => Ok(Config::default()),
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        let sel = self.selector();
        sel.validate()?;
        // with a zero epsilon scalarization is unusable anyway and fails at selection time
        if self.epsilons.iter().all(|&e| e > 0.0) {
            sel.check_base()?;
        }
        if !(self.miss_threshold.is_finite() && self.miss_threshold >= 0.0) {
            return Err(Error::Config(format!("miss_threshold must be finite and >= 0, got {}", self.miss_threshold)));
        }
        if self.bootstrap_resamples == 0 {
            return Err(Error::Config("bootstrap_resamples must be positive".into()));
        }
        if self.proxy.window == 0 {
            return Err(Error::Config("proxy.window must be positive".into()));
        }
        if !(self.proxy.sigma_alpha.is_finite() && self.proxy.sigma_alpha > 0.0) {
            return Err(Error::Config("proxy.sigma_alpha must be finite and > 0".into()));
        }
        Ok(())
    }

    pub fn selector(&self) -> SelectorConfig {
        SelectorConfig {
            epsilons: self.epsilons,
            scalarization_base: self.scalarization_base,
            weighted_sum_weights: self.weighted_sum_weights.clone(),
        }
    }

    pub fn eval_options(&self) -> EvalOptions {
        EvalOptions { normalization: self.normalization, proxy: self.proxy }
    }

    /// The builtin rulebook with any configured overrides applied.
    pub fn rulebook(&self) -> Result<Rulebook> {
        let base = Rulebook::builtin();
        match &self.rule_overrides {
            None => Ok(base),
            Some(p) => {
                let overrides: Overrides = serde_json::from_slice(&std::fs::read(p)?)?;
                base.with_overrides(&overrides)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_object_is_default() {
        assert_eq!(Config::from_json(b"{}").unwrap(), Config::default());
    }

    #[test]
    fn unknown_field_rejected() {
        assert!(matches!(Config::from_json(br#"{"epsilon": 1}"#), Err(Error::Parse(_))));
    }

    #[test]
    fn bad_values_rejected() {
        assert!(Config::from_json(br#"{"epsilons": [-1, 0, 0, 0]}"#).is_err());
        assert!(Config::from_json(br#"{"miss_threshold": -2}"#).is_err());
    }

    #[test]
    fn small_base_rejected() {
        assert!(matches!(Config::from_json(br#"{"scalarization_base": 100}"#), Err(Error::Config(_))));
        assert!(Config::from_json(br#"{"scalarization_base": 1001}"#).is_ok());
        // exact lexicographic filtering does not constrain the base
        assert!(Config::from_json(br#"{"epsilons": [0, 0, 0, 0], "scalarization_base": 100}"#).is_ok());
    }

    #[test]
    fn overrides_resolved_next_to_config() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("ov.json"), br#"{"L0.R0": {"kappa": 3.0}}"#).unwrap();
        let cfg_path = dir.path().join("cfg.json");
        std::fs::write(&cfg_path, br#"{"rule_overrides": "ov.json", "scalarization_base": 2000}"#).unwrap();
        let cfg = Config::load(&cfg_path).unwrap();
        assert_eq!(cfg.selector().scalarization_base, 2000);
        assert_eq!(cfg.rulebook().unwrap().lookup("L0.R0").unwrap().kappa, 3.0);
    }
}
