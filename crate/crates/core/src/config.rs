//! Pipeline-wide configuration, one section per stage.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pipeline::{ModelConfig, SlamConfig};
use crate::scalar::Real;
use crate::similarity::{Measure, SimilarityParams};
use crate::simulator::SimConfig;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WindowConfig {
    /// Fingerprint window length, seconds.
    pub window_s: f64,
    /// Windows with fewer APs are dropped.
    pub min_aps: usize,
}

impl Default for WindowConfig {
    fn default() -> Self {
        Self {
            window_s: 5.0,
            min_aps: 1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, bound = "T: Real")]
pub struct SweepConfig<T> {
    pub nu_s: Vec<T>,
    pub nu_p: Vec<T>,
    pub measures: Vec<Measure>,
}

impl<T: Real> Default for SweepConfig<T> {
    fn default() -> Self {
        Self {
            nu_s: [0.0, 4.0, 8.0].iter().map(|v| T::lit(*v)).collect(),
            nu_p: [0.0, 4.0, 8.0].iter().map(|v| T::lit(*v)).collect(),
            measures: Measure::ALL.to_vec(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, bound = "T: Real")]
pub struct PipelineConfig<T> {
    /// Master seed; overrides `sim.seed` when the two differ.
    pub seed: u64,
    pub sim: SimConfig,
    pub window: WindowConfig,
    pub similarity: SimilarityParams<T>,
    pub model: ModelConfig<T>,
    pub slam: SlamConfig<T>,
    pub sweep: SweepConfig<T>,
}

impl<T: Real> Default for PipelineConfig<T> {
    fn default() -> Self {
        let sim = SimConfig::default();
        Self {
            seed: sim.seed,
            sim,
            window: WindowConfig::default(),
            similarity: SimilarityParams::default(),
            model: ModelConfig::default(),
            slam: SlamConfig::default(),
            sweep: SweepConfig::default(),
        }
    }
}

impl<T: Real> PipelineConfig<T> {
    pub fn validate(&self) -> Result<()> {
        self.sim.validate()?;
        if !(self.window.window_s > 0.0 && self.window.window_s.is_finite()) {
            return Err(Error::Config(format!(
                "window_s must be > 0, got {}",
                self.window.window_s
            )));
        }
        self.similarity.validate()?;
        self.model.validate()?;
        self.slam.validate()?;
        let sw = &self.sweep;
        if sw.nu_s.is_empty() || sw.nu_p.is_empty() || sw.measures.is_empty() {
            return Err(Error::Config("sweep grids and measure list must be non-empty".into()));
        }
        if sw.nu_s.iter().chain(&sw.nu_p).any(|v| !(*v >= T::zero())) {
            return Err(Error::Config("sweep thresholds must be >= 0".into()));
        }
        Ok(())
    }

    /// Simulation config with the master seed applied.
    pub fn sim_config(&self) -> SimConfig {
        SimConfig {
            seed: self.seed,
            ..self.sim.clone()
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }
}
