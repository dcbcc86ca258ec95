//! JSON experiment configuration.

use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::{ModelParams, TimeGrid};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub omega: f64,
    pub gamma: f64,
    /// `[re, im]`
    pub alpha: [f64; 2],
    pub t_end: f64,
    pub n_steps: usize,
    pub seed: u64,
    pub n_paths: usize,
    /// Fock level for `measure`.
    #[serde(default)]
    pub n: u32,
    /// Output times for `expect`, `covar`, `measure`; defaults to `t_end`.
    #[serde(default)]
    pub t_grid: Option<Vec<f64>>,
    #[serde(default)]
    pub epsilon_list: Option<Vec<f64>>,
    /// In units of `1 / (|kappa|^2 t_end)`.
    #[serde(default)]
    pub lambda_grid: Option<Vec<f64>>,
    #[serde(default)]
    pub fock_dim: Option<usize>,
    #[serde(default)]
    pub n_levels: Option<u32>,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn params(&self) -> Result<ModelParams> {
        ModelParams::new(self.omega, self.gamma, Complex64::new(self.alpha[0], self.alpha[1]))
    }

    pub fn grid(&self) -> Result<TimeGrid> {
        TimeGrid::resolved(self.t_end, self.n_steps, &self.params()?)
    }

    /// Requested output times, each snapped to the grid.
    pub fn nodes(&self) -> Result<Vec<usize>> {
        let grid = self.grid()?;
        let times = self.t_grid.clone().unwrap_or_else(|| vec![self.t_end]);
        let mut nodes = times
            .iter()
            .map(|&t| {
                grid.node_of(t).ok_or_else(|| {
                    Error::GridMismatch(format!("t = {t} is not a node of the grid"))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        nodes.sort_unstable();
        nodes.dedup();
        Ok(nodes)
    }

    pub fn validate(&self) -> Result<()> {
        self.params()?;
        self.grid()?;
        if self.n_paths < 2 {
            return Err(Error::InvalidParameter {
                name: "n_paths",
                reason: format!("need at least 2, got {}", self.n_paths),
            });
        }
        Ok(())
    }
}
