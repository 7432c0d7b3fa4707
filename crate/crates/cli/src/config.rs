use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use tchange::TimeChangeSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    CatSuspension,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Experiment {
    Access,
    Averages,
    Coboundary,
    Foliation,
    Identities,
    Mixing,
    Pcf,
    Rates,
}

impl Experiment {
    /// Alphabetical.
    pub const ALL: [Experiment; 8] = [
        Self::Access,
        Self::Averages,
        Self::Coboundary,
        Self::Foliation,
        Self::Identities,
        Self::Mixing,
        Self::Pcf,
        Self::Rates,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::Access => "access",
            Self::Averages => "averages",
            Self::Coboundary => "coboundary",
            Self::Foliation => "foliation",
            Self::Identities => "identities",
            Self::Mixing => "mixing",
            Self::Pcf => "pcf",
            Self::Rates => "rates",
        }
    }

    pub fn description(self) -> &'static str {
        match self {
            Self::Access => "accessibility certificate: engulfing sweep of su-quadrilaterals at a sampled anchor",
            Self::Averages => "Haar averages of cycle functionals and orbit integrals",
            Self::Coboundary => "coboundary detector: cycle functionals over a quadrilateral family",
            Self::Foliation => "new stable leaves: contraction rate, splitting invariance, gradient check",
            Self::Identities => "cocycle identities of v and alpha and the time-changed group law",
            Self::Mixing => "correlation profile of cos(2 pi roof) under the time-changed flow",
            Self::Pcf => "periodic cycle functionals, reversal and path transport",
            Self::Rates => "pointwise partial hyperbolicity and center bunching at horizon t_max",
        }
    }

    /// Fields the experiment reads besides `model`, `tau`, `experiment`, `seed`, `tol`, `out`.
    pub fn fields(self) -> &'static str {
        match self {
            Self::Access => "samples (anchors tried)",
            Self::Averages => "samples",
            Self::Coboundary => "samples (anchors)",
            Self::Foliation => "samples, t_max (fit horizon)",
            Self::Identities => "samples, t_max (time range)",
            Self::Mixing => "samples, t_max (last lag)",
            Self::Pcf => "samples (paths)",
            Self::Rates => "samples, t_max (horizon T)",
        }
    }

    pub fn default_samples(self) -> u64 {
        match self {
            Self::Access => 10,
            Self::Averages => 10_000,
            Self::Coboundary => 10,
            Self::Foliation => 100,
            Self::Identities => 1000,
            Self::Mixing => 10_000,
            Self::Pcf => 50,
            Self::Rates => 200,
        }
    }

    pub fn default_t_max(self) -> f64 {
        match self {
            Self::Foliation => 20.0,
            Self::Mixing => 40.0,
            Self::Identities => 5.0,
            _ => 10.0,
        }
    }
}

fn default_seed() -> u64 {
    1
}

fn default_tol() -> f64 {
    1e-13
}

fn default_out() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: ModelKind,
    pub tau: TimeChangeSpec,
    pub experiment: Experiment,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_max: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<u64>,
    #[serde(default = "default_out")]
    pub out: PathBuf,
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("{0}")]
    Parse(#[from] toml::de::Error),
    #[error("tol must be positive and finite, got {0}")]
    Tol(f64),
    #[error("samples must be at least 1")]
    Samples,
    #[error("t_max must be positive and finite, got {0}")]
    TMax(f64),
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let cfg: Self = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(self.tol > 0.0 && self.tol.is_finite()) {
            return Err(ConfigError::Tol(self.tol));
        }
        if self.samples == Some(0) {
            return Err(ConfigError::Samples);
        }
        if let Some(t) = self.t_max {
            if !(t > 0.0 && t.is_finite()) {
                return Err(ConfigError::TMax(t));
            }
        }
        Ok(())
    }

    pub fn samples(&self) -> usize {
        self.samples.unwrap_or_else(|| self.experiment.default_samples()) as usize
    }

    pub fn t_max(&self) -> f64 {
        self.t_max.unwrap_or_else(|| self.experiment.default_t_max())
    }

    /// SHA-256 of the canonical JSON form of the effective config, with the
    /// output directory left out so the hash only covers what shapes results.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.out = PathBuf::new();
        let canonical = serde_json::to_string(&c).expect("config serializes");
        hex::encode(Sha256::digest(canonical.as_bytes()))
    }
}
