//! Run configuration: documented defaults, a flat `key=value` file format
//! with `#` comments, an environment-variable seed override, and CLI flags
//! on top. Precedence: CLI flag > `KCODDP_SEED` > config file > default.

use std::collections::BTreeMap;
use std::path::Path;

use anyhow::{bail, Context, Result};
use kcoddp_core::ttmcmc::{MoveScales, MoveWeights};

/// Environment variable overriding the master seed.
pub const SEED_ENV_VAR: &str = "KCODDP_SEED";

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub seed: u64,
    pub n_iter: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub k_init: usize,
    pub k_max: usize,
    /// Additive move scales `a1..a14`.
    pub scales: MoveScales,
    pub weights: MoveWeights,
    /// Region tail mass for the margin radius.
    pub epsilon: f64,
    /// Prior median of `alpha`.
    pub n0: f64,
    /// Shape of the inverted-beta prior on `alpha`.
    pub eta: f64,
    /// Log-variance of the log-normal prior on `lambda`.
    pub b_lambda: f64,
    /// Concentration and intensity used to size the computational region.
    pub region_alpha: f64,
    pub region_lambda: f64,
    pub chains: usize,
    /// Log-transform the response and covariate in regression mode.
    pub log_regression: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 42,
            n_iter: 20_000,
            burn_in: 5_000,
            thin: 10,
            k_init: 15,
            k_max: 30,
            scales: MoveScales::default(),
            weights: MoveWeights::default(),
            epsilon: 0.01,
            n0: 1.0,
            eta: 2.0,
            b_lambda: 20.0,
            region_alpha: 1.0,
            region_lambda: 10.0,
            chains: 1,
            log_regression: true,
        }
    }
}

impl RunConfig {
    /// Parse a flat `key=value` file over the defaults.
    pub fn from_file(path: &Path) -> Result<Self> {
        let mut cfg = RunConfig::default();
        cfg.apply_file(path)?;
        Ok(cfg)
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<()> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config file {}", path.display()))?;
        let mut entries = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                bail!("config line {}: expected key=value, got `{raw}`", lineno + 1);
            };
            entries.insert(key.trim().to_string(), value.trim().to_string());
        }
        for (key, value) in entries {
            self.apply_entry(&key, &value)
                .with_context(|| format!("config key `{key}`"))?;
        }
        Ok(())
    }

    fn apply_entry(&mut self, key: &str, value: &str) -> Result<()> {
        let as_f64 = || -> Result<f64> { Ok(value.parse::<f64>()?) };
        let as_usize = || -> Result<usize> { Ok(value.parse::<usize>()?) };
        if let Some(idx) = key.strip_prefix('a').and_then(|s| s.parse::<usize>().ok()) {
            if (1..=14).contains(&idx) {
                self.scales.a[idx - 1] = as_f64()?;
                return Ok(());
            }
        }
        match key {
            "seed" => self.seed = value.parse::<u64>()?,
            "n_iter" => self.n_iter = as_usize()?,
            "burn_in" => self.burn_in = as_usize()?,
            "thin" => self.thin = as_usize()?,
            "k_init" => self.k_init = as_usize()?,
            "k_max" => self.k_max = as_usize()?,
            "epsilon" => self.epsilon = as_f64()?,
            "n0" => self.n0 = as_f64()?,
            "eta" => self.eta = as_f64()?,
            "b_lambda" => self.b_lambda = as_f64()?,
            "region_alpha" => self.region_alpha = as_f64()?,
            "region_lambda" => self.region_lambda = as_f64()?,
            "chains" => self.chains = as_usize()?,
            "w_birth" => self.weights.birth = as_f64()?,
            "w_death" => self.weights.death = as_f64()?,
            "w_no_change" => self.weights.no_change = as_f64()?,
            "log_regression" => self.log_regression = value.parse::<bool>()?,
            other => bail!("unknown config key `{other}`"),
        }
        Ok(())
    }

    /// Apply the environment seed override if present.
    pub fn apply_env(&mut self) -> Result<()> {
        if let Ok(v) = std::env::var(SEED_ENV_VAR) {
            self.seed = v
                .parse::<u64>()
                .with_context(|| format!("{SEED_ENV_VAR} must be an unsigned integer"))?;
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_iter <= self.burn_in {
            bail!(
                "n_iter ({}) must exceed burn_in ({})",
                self.n_iter,
                self.burn_in
            );
        }
        if self.thin == 0 {
            bail!("thin must be >= 1");
        }
        if self.k_init < 1 || self.k_init > self.k_max {
            bail!("k_init must lie in 1..=k_max");
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            bail!("epsilon must lie in (0,1)");
        }
        if self.chains < 1 {
            bail!("chains must be >= 1");
        }
        for (name, v) in [
            ("n0", self.n0),
            ("eta", self.eta),
            ("b_lambda", self.b_lambda),
            ("region_alpha", self.region_alpha),
            ("region_lambda", self.region_lambda),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                bail!("{name} must be finite and > 0");
            }
        }
        if self.scales.a.iter().any(|a| !(*a > 0.0 && a.is_finite())) {
            bail!("move scales must be finite and > 0");
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    #[test]
    fn defaults_match_documented_constants() {
        let cfg = RunConfig::default();
        assert_eq!(cfg.k_init, 15);
        assert_eq!(cfg.k_max, 30);
        assert_eq!(cfg.b_lambda, 20.0);
        assert_eq!(cfg.epsilon, 0.01);
        assert!(cfg.scales.a.iter().all(|a| *a == 0.1));
        assert_eq!(cfg.weights.birth, 1.0 / 3.0);
        assert_eq!(cfg.weights.death, 1.0 / 3.0);
        assert_eq!(cfg.weights.no_change, 1.0 / 3.0);
        // model-side constants pinned alongside the config defaults
        assert_eq!(kcoddp_core::kernel::DEFAULT_A, 3.5);
        assert_eq!(kcoddp_core::model::UNIFORM_LO, 3.0);
        assert_eq!(kcoddp_core::model::UNIFORM_HI, 200.0);
    }

    #[test]
    fn file_parsing_and_overrides() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.conf");
        let mut f = std::fs::File::create(&path).unwrap();
        writeln!(f, "# comment line").unwrap();
        writeln!(f, "seed = 7   # trailing comment").unwrap();
        writeln!(f, "n_iter=1000").unwrap();
        writeln!(f, "burn_in=100").unwrap();
        writeln!(f, "a3 = 0.25").unwrap();
        writeln!(f, "w_birth = 0.2").unwrap();
        drop(f);
        let cfg = RunConfig::from_file(&path).unwrap();
        assert_eq!(cfg.seed, 7);
        assert_eq!(cfg.n_iter, 1000);
        assert_eq!(cfg.scales.a[2], 0.25);
        assert_eq!(cfg.weights.birth, 0.2);
        assert_eq!(cfg.k_init, 15); // untouched default
    }

    #[test]
    fn unknown_key_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.conf");
        std::fs::write(&path, "mystery=1\n").unwrap();
        assert!(RunConfig::from_file(&path).is_err());
    }

    #[test]
    fn validation_catches_bad_lengths() {
        let mut cfg = RunConfig::default();
        cfg.n_iter = 100;
        cfg.burn_in = 100;
        assert!(cfg.validate().is_err());
        cfg.burn_in = 10;
        cfg.thin = 0;
        assert!(cfg.validate().is_err());
    }
}
