//! JSON run configuration.

use std::path::{Path, PathBuf};

use mbd_core::baselines::{CemConfig, MppiConfig};
use mbd_core::demos::{RrtConfig, DEFAULT_DEMO_SIGMA};
use mbd_core::diffusion::BackwardKind;
use mbd_core::{ConstraintMode, IndexConvention, MbdConfig, NoiseSchedule};
use serde::{Deserialize, Serialize};

use crate::error::BenchError;
use crate::problems;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Mbd,
    Cem,
    Mppi,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Self::Mbd => "mbd",
            Self::Cem => "cem",
            Self::Mppi => "mppi",
        }
    }
}

/// Serializable form of [`MbdConfig`]; the seed comes from the run's seed list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MbdSettings {
    pub n_steps: usize,
    pub beta_start: f64,
    pub beta_end: f64,
    pub n_samples: usize,
    pub temperature: f64,
    pub backward_kind: BackwardKind,
    pub index_convention: IndexConvention,
    pub workers: usize,
}

impl Default for MbdSettings {
    fn default() -> Self {
        Self {
            n_steps: 100,
            beta_start: 1e-4,
            beta_end: 1e-2,
            n_samples: 100,
            temperature: 0.1,
            backward_kind: BackwardKind::Mcsa,
            index_convention: IndexConvention::Current,
            workers: 0,
        }
    }
}

impl MbdSettings {
    pub fn to_config(&self, seed: u64) -> Result<MbdConfig, BenchError> {
        let schedule = NoiseSchedule::linear(self.beta_start, self.beta_end, self.n_steps)
            .map_err(|e| BenchError::ConfigInvalid(e.to_string()))?;
        let cfg = MbdConfig {
            schedule,
            n_samples: self.n_samples,
            temperature: self.temperature,
            seed,
            backward_kind: self.backward_kind,
            index_convention: self.index_convention,
            workers: self.workers,
        };
        cfg.validate().map_err(|e| BenchError::ConfigInvalid(e.to_string()))?;
        Ok(cfg)
    }
}

/// Where a demonstration comes from. RRT runs use the run seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "source", deny_unknown_fields)]
pub enum DemoSettings {
    Rrt {
        #[serde(default)]
        rrt: RrtConfig,
        #[serde(default = "default_sigma")]
        sigma: f64,
    },
    Csv {
        path: PathBuf,
    },
}

fn default_sigma() -> f64 {
    DEFAULT_DEMO_SIGMA
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub task: String,
    pub method: Method,
    #[serde(default)]
    pub mbd: MbdSettings,
    #[serde(default)]
    pub cem: CemConfig,
    #[serde(default)]
    pub mppi: MppiConfig,
    #[serde(default)]
    pub constraint_mode: ConstraintMode,
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub demo: Option<DemoSettings>,
    #[serde(default)]
    pub horizon: Option<usize>,
    /// Black-box runs count as successes when the best cost is at most this.
    #[serde(default)]
    pub success_threshold: Option<f64>,
    /// Directory holding the four MNIST IDX files, for `mlp_mnist`.
    #[serde(default)]
    pub mnist_dir: Option<PathBuf>,
    /// Training images scored per objective evaluation, for `mlp_mnist`.
    #[serde(default = "default_mnist_subset")]
    pub mnist_subset: usize,
    #[serde(default = "default_out_dir")]
    pub out_dir: PathBuf,
}

fn default_mnist_subset() -> usize {
    256
}

fn default_out_dir() -> PathBuf {
    PathBuf::from("runs")
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, BenchError> {
        serde_json::from_str(text).map_err(|e| BenchError::ConfigInvalid(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, BenchError> {
        let text = std::fs::read_to_string(path).map_err(|e| BenchError::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<(), BenchError> {
        let kind = problems::kind_of(&self.task).ok_or_else(|| BenchError::TaskUnknown(self.task.clone()))?;
        if self.seeds.is_empty() {
            return Err(BenchError::ConfigInvalid("seeds must be nonempty".into()));
        }
        let invalid = |m: String| BenchError::ConfigInvalid(m);
        match self.method {
            Method::Mbd => {
                self.mbd.to_config(0)?;
            }
            Method::Cem => {
                if self.cem.n_iters == 0 || self.cem.n_samples == 0 {
                    return Err(invalid("cem needs at least one iteration and one sample".into()));
                }
            }
            Method::Mppi => {
                if !kind.is_trajectory() {
                    return Err(invalid(format!("mppi needs a trajectory task, '{}' is not one", self.task)));
                }
                self.mppi.validate().map_err(|e| invalid(e.to_string()))?;
            }
        }
        if self.demo.is_some() && (!kind.is_trajectory() || self.method != Method::Mbd) {
            return Err(invalid("demonstrations apply only to mbd on trajectory tasks".into()));
        }
        if self.horizon == Some(0) {
            return Err(invalid("horizon must be positive".into()));
        }
        if self.horizon.is_some() && !kind.is_trajectory() {
            return Err(invalid("horizon applies only to trajectory tasks".into()));
        }
        Ok(())
    }
}
