//! JSON run configuration.

use std::path::Path;

use platform_qbd::{Model, ModelParams, SimConfig, SolverOptions};
use serde::{Deserialize, Serialize};

use crate::CliError;

pub const DEFAULT_PRICE: f64 = 50.0;
pub const DEFAULT_SHARE: f64 = 0.8;

fn default_price() -> f64 {
    DEFAULT_PRICE
}

fn default_share() -> f64 {
    DEFAULT_SHARE
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsConfig {
    pub lambda: f64,
    pub mu: f64,
    pub gamma: f64,
    pub n_owners: usize,
    #[serde(default = "default_price")]
    pub price: f64,
    #[serde(default = "default_share")]
    pub share: f64,
}

impl ParamsConfig {
    pub fn to_params(&self) -> ModelParams {
        ModelParams {
            lambda: self.lambda,
            mu: self.mu,
            gamma: self.gamma,
            n_owners: self.n_owners,
            price: self.price,
            share: self.share,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParameter {
    Lambda,
    Gamma,
    Mu,
    NOwners,
    Price,
    Share,
}

impl SweepParameter {
    pub fn as_str(self) -> &'static str {
        match self {
            SweepParameter::Lambda => "lambda",
            SweepParameter::Gamma => "gamma",
            SweepParameter::Mu => "mu",
            SweepParameter::NOwners => "n_owners",
            SweepParameter::Price => "price",
            SweepParameter::Share => "share",
        }
    }
}

/// `steps + 1` evenly spaced points from `from` to `to`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub parameter: SweepParameter,
    pub from: f64,
    pub to: f64,
    pub steps: usize,
}

impl SweepConfig {
    pub fn values(&self) -> Vec<f64> {
        (0..=self.steps)
            .map(|k| {
                if k == self.steps {
                    self.to
                } else {
                    self.from + (self.to - self.from) * k as f64 / self.steps as f64
                }
            })
            .collect()
    }

    pub fn apply(&self, base: &ModelParams, value: f64) -> ModelParams {
        let mut p = *base;
        match self.parameter {
            SweepParameter::Lambda => p.lambda = value,
            SweepParameter::Gamma => p.gamma = value,
            SweepParameter::Mu => p.mu = value,
            SweepParameter::NOwners => p.n_owners = value.round() as usize,
            SweepParameter::Price => p.price = value,
            SweepParameter::Share => p.share = value,
        }
        p
    }

    pub fn grid(&self, base: &ModelParams) -> Vec<ModelParams> {
        self.values().into_iter().map(|v| self.apply(base, v)).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SojournConfig {
    /// Explicit evaluation times.
    #[serde(default)]
    pub times: Vec<f64>,
    /// Without explicit times: `points` evenly spaced times from 0 to
    /// `horizon_factor` times the Little's-law mean.
    #[serde(default)]
    pub points: Option<usize>,
    #[serde(default)]
    pub horizon_factor: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: Model,
    pub params: ParamsConfig,
    #[serde(default)]
    pub sweep: Option<SweepConfig>,
    #[serde(default)]
    pub solver: SolverOptions,
    #[serde(default)]
    pub sim: Option<SimConfig>,
    #[serde(default)]
    pub sojourn: Option<SojournConfig>,
    /// Output file prefix.
    #[serde(default)]
    pub outputs: Option<String>,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let cfg: RunConfig = serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn params(&self) -> ModelParams {
        self.params.to_params()
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.params().validate().map_err(|e| CliError::Config(e.to_string()))?;
        if let Some(sweep) = &self.sweep {
            if sweep.steps < 1 {
                return Err(CliError::Config("sweep steps must be at least 1".into()));
            }
            if !(sweep.from.is_finite() && sweep.to.is_finite()) || sweep.from > sweep.to {
                return Err(CliError::Config("sweep range must satisfy from <= to".into()));
            }
            for p in sweep.grid(&self.params()) {
                p.validate()
                    .map_err(|e| CliError::Config(format!("sweep point: {e}")))?;
            }
        }
        if let Some(sim) = &self.sim {
            sim.validate().map_err(|e| CliError::Config(e.to_string()))?;
        }
        let o = &self.solver;
        if !(o.epsilon > 0.0 && o.truncation_tol > 0.0 && o.truncation_tol < 1.0 && o.max_iter >= 1) {
            return Err(CliError::Config("solver options out of range".into()));
        }
        Ok(())
    }
}
