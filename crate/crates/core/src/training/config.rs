//! Training configuration and its flat `key = value` text form.
//!
//! One key per line, `#` starts a comment, blank lines are ignored. Keys are
//! the [`TrainConfig`] field names; unlisted keys keep their defaults.

use std::fmt::Write as _;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::models::{Activation, MlpSpec};

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub iterations: u64,
    pub lr_g: f64,
    pub lr_d: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    /// Weight of the sample-space locality term in the generator loss.
    pub gamma: f64,
    /// Langevin step size λ; scales the optional noise term.
    pub mcmc_lambda: f64,
    pub noise_enabled: bool,
    /// Probability of real-data particles; the gradient penalty weight is
    /// `gp_rho·gp_lambda/2`.
    pub gp_rho: f64,
    pub gp_lambda: f64,
    pub polyak_tau: f64,
    pub d_steps_per_g: usize,
    pub seed: u64,
    pub latent_dim: usize,
    pub g_hidden: Vec<usize>,
    pub d_hidden: Vec<usize>,
    pub d_activation: Activation,
    pub spectral_norm: bool,
    /// Fisher-similarity cadence in iterations; 0 disables monitoring.
    pub fs_every: u64,
    /// Rows in the monitored real and generated batches.
    pub fs_batch: usize,
    /// Generator samples per Fisher statistics estimate; `None` means
    /// `10·batch_size`.
    pub fs_samples: Option<usize>,
    /// Per-parameter temperature: similarity is `exp(−(fs_temperature/P)·D)`
    /// for a discriminator with `P` parameters.
    pub fs_temperature: f64,
    pub fisher_epsilon: f64,
    /// Checkpoint cadence in iterations; 0 writes only the final state.
    pub checkpoint_every: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            batch_size: 64,
            iterations: 5000,
            lr_g: 2e-4,
            lr_d: 4e-4,
            adam_beta1: 0.0,
            adam_beta2: 0.999,
            gamma: 0.0,
            mcmc_lambda: 0.1,
            noise_enabled: false,
            gp_rho: 0.0,
            gp_lambda: 1.0,
            polyak_tau: 0.999,
            d_steps_per_g: 1,
            seed: 0,
            latent_dim: 8,
            g_hidden: vec![64, 64],
            d_hidden: vec![64, 64],
            d_activation: Activation::Relu,
            spectral_norm: true,
            fs_every: 100,
            fs_batch: 64,
            fs_samples: None,
            fs_temperature: 10.0,
            fisher_epsilon: 1e-8,
            checkpoint_every: 0,
        }
    }
}

/// Every recognised key, in the order [`TrainConfig::to_pairs`] emits them.
pub const CONFIG_KEYS: [&str; 25] = [
    "batch_size",
    "iterations",
    "lr_g",
    "lr_d",
    "adam_beta1",
    "adam_beta2",
    "gamma",
    "mcmc_lambda",
    "noise_enabled",
    "gp_rho",
    "gp_lambda",
    "polyak_tau",
    "d_steps_per_g",
    "seed",
    "latent_dim",
    "g_hidden",
    "d_hidden",
    "d_activation",
    "spectral_norm",
    "fs_every",
    "fs_batch",
    "fs_samples",
    "fs_temperature",
    "fisher_epsilon",
    "checkpoint_every",
];

fn config_err(key: &str, message: impl Into<String>) -> Error {
    Error::Config {
        key: key.to_string(),
        message: message.into(),
    }
}

fn parse_value<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| config_err(key, format!("cannot parse `{value}`")))
}

fn parse_widths(key: &str, value: &str) -> Result<Vec<usize>> {
    let widths: Vec<usize> = value
        .split(',')
        .map(|w| parse_value(key, w.trim()))
        .collect::<Result<_>>()?;
    if widths.is_empty() || widths.contains(&0) {
        return Err(config_err(key, "widths must be a non-empty list of positive integers"));
    }
    Ok(widths)
}

fn join_widths(w: &[usize]) -> String {
    w.iter().map(usize::to_string).collect::<Vec<_>>().join(",")
}

impl TrainConfig {
    /// Sets one field from its text form.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "batch_size" => self.batch_size = parse_value(key, value)?,
            "iterations" => self.iterations = parse_value(key, value)?,
            "lr_g" => self.lr_g = parse_value(key, value)?,
            "lr_d" => self.lr_d = parse_value(key, value)?,
            "adam_beta1" => self.adam_beta1 = parse_value(key, value)?,
            "adam_beta2" => self.adam_beta2 = parse_value(key, value)?,
            "gamma" => self.gamma = parse_value(key, value)?,
            "mcmc_lambda" => self.mcmc_lambda = parse_value(key, value)?,
            "noise_enabled" => self.noise_enabled = parse_value(key, value)?,
            "gp_rho" => self.gp_rho = parse_value(key, value)?,
            "gp_lambda" => self.gp_lambda = parse_value(key, value)?,
            "polyak_tau" => self.polyak_tau = parse_value(key, value)?,
            "d_steps_per_g" => self.d_steps_per_g = parse_value(key, value)?,
            "seed" => self.seed = parse_value(key, value)?,
            "latent_dim" => self.latent_dim = parse_value(key, value)?,
            "g_hidden" => self.g_hidden = parse_widths(key, value)?,
            "d_hidden" => self.d_hidden = parse_widths(key, value)?,
            "d_activation" => {
                self.d_activation = value
                    .parse()
                    .map_err(|_| config_err(key, format!("unknown activation `{value}`")))?
            }
            "spectral_norm" => self.spectral_norm = parse_value(key, value)?,
            "fs_every" => self.fs_every = parse_value(key, value)?,
            "fs_batch" => self.fs_batch = parse_value(key, value)?,
            "fs_samples" => {
                self.fs_samples = match value {
                    "auto" => None,
                    v => Some(parse_value(key, v)?),
                }
            }
            "fs_temperature" => self.fs_temperature = parse_value(key, value)?,
            "fisher_epsilon" => self.fisher_epsilon = parse_value(key, value)?,
            "checkpoint_every" => self.checkpoint_every = parse_value(key, value)?,
            _ => return Err(config_err(key, "unknown key")),
        }
        Ok(())
    }

    /// Every field as `(key, value)` text; floats use round-trip formatting.
    pub fn to_pairs(&self) -> Vec<(&'static str, String)> {
        vec![
            ("batch_size", self.batch_size.to_string()),
            ("iterations", self.iterations.to_string()),
            ("lr_g", format!("{:?}", self.lr_g)),
            ("lr_d", format!("{:?}", self.lr_d)),
            ("adam_beta1", format!("{:?}", self.adam_beta1)),
            ("adam_beta2", format!("{:?}", self.adam_beta2)),
            ("gamma", format!("{:?}", self.gamma)),
            ("mcmc_lambda", format!("{:?}", self.mcmc_lambda)),
            ("noise_enabled", self.noise_enabled.to_string()),
            ("gp_rho", format!("{:?}", self.gp_rho)),
            ("gp_lambda", format!("{:?}", self.gp_lambda)),
            ("polyak_tau", format!("{:?}", self.polyak_tau)),
            ("d_steps_per_g", self.d_steps_per_g.to_string()),
            ("seed", self.seed.to_string()),
            ("latent_dim", self.latent_dim.to_string()),
            ("g_hidden", join_widths(&self.g_hidden)),
            ("d_hidden", join_widths(&self.d_hidden)),
            ("d_activation", self.d_activation.name().to_string()),
            ("spectral_norm", self.spectral_norm.to_string()),
            ("fs_every", self.fs_every.to_string()),
            ("fs_batch", self.fs_batch.to_string()),
            (
                "fs_samples",
                self.fs_samples.map_or("auto".to_string(), |n| n.to_string()),
            ),
            ("fs_temperature", format!("{:?}", self.fs_temperature)),
            ("fisher_epsilon", format!("{:?}", self.fisher_epsilon)),
            ("checkpoint_every", self.checkpoint_every.to_string()),
        ]
    }

    pub fn from_pairs<'a>(pairs: impl IntoIterator<Item = (&'a str, &'a str)>) -> Result<Self> {
        let mut cfg = TrainConfig::default();
        for (k, v) in pairs {
            cfg.set(k, v)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Parses the text form and validates the result.
    pub fn parse(text: &str) -> Result<Self> {
        let mut pairs = Vec::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| {
                config_err(
                    line.split_whitespace().next().unwrap_or(line),
                    format!("line {} is not `key = value`", n + 1),
                )
            })?;
            pairs.push((k.trim(), v.trim()));
        }
        Self::from_pairs(pairs)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (k, v) in self.to_pairs() {
            let _ = writeln!(out, "{k} = {v}");
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |key: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(config_err(key, format!("must be finite and > 0, got {v}")))
            }
        };
        let unit = |key: &str, v: f64, closed_top: bool| {
            let ok = v >= 0.0 && if closed_top { v <= 1.0 } else { v < 1.0 };
            if ok {
                Ok(())
            } else {
                Err(config_err(key, format!("out of range, got {v}")))
            }
        };
        if self.batch_size == 0 {
            return Err(config_err("batch_size", "must be > 0"));
        }
        positive("lr_g", self.lr_g)?;
        positive("lr_d", self.lr_d)?;
        positive("mcmc_lambda", self.mcmc_lambda)?;
        unit("adam_beta1", self.adam_beta1, false)?;
        unit("adam_beta2", self.adam_beta2, false)?;
        unit("gp_rho", self.gp_rho, true)?;
        unit("polyak_tau", self.polyak_tau, true)?;
        if !(self.gamma >= 0.0 && self.gamma.is_finite()) {
            return Err(config_err("gamma", "must be finite and >= 0"));
        }
        if !(self.gp_lambda >= 0.0 && self.gp_lambda.is_finite()) {
            return Err(config_err("gp_lambda", "must be finite and >= 0"));
        }
        if self.d_steps_per_g == 0 {
            return Err(config_err("d_steps_per_g", "must be > 0"));
        }
        if self.latent_dim == 0 {
            return Err(config_err("latent_dim", "must be > 0"));
        }
        if self.fs_batch == 0 {
            return Err(config_err("fs_batch", "must be > 0"));
        }
        if self.fs_samples.is_some_and(|n| n < 2) {
            return Err(config_err("fs_samples", "must be at least 2"));
        }
        positive("fs_temperature", self.fs_temperature)?;
        if !(self.fisher_epsilon >= 0.0 && self.fisher_epsilon.is_finite()) {
            return Err(config_err("fisher_epsilon", "must be finite and >= 0"));
        }
        Ok(())
    }

    pub fn fisher_samples(&self) -> usize {
        self.fs_samples.unwrap_or(10 * self.batch_size)
    }

    pub fn generator_spec(&self, data_dim: usize) -> Result<MlpSpec> {
        MlpSpec::generator(self.latent_dim, &self.g_hidden, data_dim)
    }

    pub fn discriminator_spec(&self, data_dim: usize) -> Result<MlpSpec> {
        let widths = std::iter::once(data_dim)
            .chain(self.d_hidden.iter().copied())
            .chain(std::iter::once(1))
            .collect();
        MlpSpec::uniform(widths, self.d_activation, Activation::Sigmoid)
    }
}
