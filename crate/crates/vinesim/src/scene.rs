//! Scene-file parsing and validation.
//!
//! Scenes are TOML documents with three sections: `scene` (heaters,
//! occluders, ambient, decay model), `robot` (spine, actuator, fluid,
//! chain, growth and thermal parameters) and `sim` (time stepping).
//! Unknown keys are fatal; every module invariant is checked at load.

use crate::engine::RobotConfig;
use crate::heatfield::HeatScene;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SceneError {
    #[error("cannot read scene file: {0}")]
    Io(#[from] std::io::Error),
    #[error("schema error: {0}")]
    Schema(String),
    #[error("invariant violation ({module}): {message}")]
    Invariant { module: &'static str, message: String },
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimParams {
    /// Time step, s.
    pub dt: f64,
    /// Simulated horizon, s.
    pub t_end: f64,
    /// Record every n-th step.
    pub sample_every: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneFile {
    pub scene: HeatScene,
    pub robot: RobotConfig,
    pub sim: SimParams,
}

impl SceneFile {
    pub fn parse(text: &str) -> Result<Self, SceneError> {
        let file: SceneFile =
            toml::from_str(text).map_err(|e| SceneError::Schema(e.to_string()))?;
        file.validate()?;
        Ok(file)
    }

    pub fn load(path: &std::path::Path) -> Result<Self, SceneError> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text)
    }

    pub fn validate(&self) -> Result<(), SceneError> {
        self.scene.validate().map_err(|e| SceneError::Invariant {
            module: "heatfield",
            message: e.to_string(),
        })?;
        self.robot.actuator.validate().map_err(|e| SceneError::Invariant {
            module: "ppam",
            message: e.to_string(),
        })?;
        self.robot.fluid.validate().map_err(|e| SceneError::Invariant {
            module: "thermo",
            message: e.to_string(),
        })?;
        self.robot.validate().map_err(|e| SceneError::Invariant {
            module: "engine",
            message: e.to_string(),
        })?;
        if self.sim.dt <= 0.0 || self.sim.t_end < 0.0 || self.sim.sample_every == 0 {
            return Err(SceneError::Invariant {
                module: "engine",
                message: "sim requires dt > 0, t_end >= 0, sample_every >= 1".into(),
            });
        }
        if self.robot.thermal_tau > 0.0 && self.sim.dt > self.robot.thermal_tau / 10.0 {
            return Err(SceneError::Invariant {
                module: "thermo",
                message: format!(
                    "dt = {} too large for thermal_tau = {} (need dt <= tau/10)",
                    self.sim.dt, self.robot.thermal_tau
                ),
            });
        }
        Ok(())
    }
}
