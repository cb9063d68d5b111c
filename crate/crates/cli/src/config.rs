use std::path::Path;

use gazeintent::attention::AttentionConfig;
use gazeintent::control::{ControllerConfig, SimConfig};
use gazeintent::intent::{PredictorConfig, TrainOptions};
use gazeintent::synth::GazeProfileParams;
use gazeintent::world::BoardLayout;
use gazeintent_session::SessionConfig;
use serde::{Deserialize, Serialize};

use crate::CliError;

/// Every tunable of every command. Missing keys take the defaults below;
/// unknown keys are an error. `gazeintent print-config` prints the defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    /// Seed used when a command gets no `--seed`.
    pub seed: u64,
    /// sigma 60 mm, window 4 s, 300 samples, frame 1/75 s.
    pub attention: AttentionConfig,
    /// RBF kernel, gamma 1/dim, C 1, tol 1e-3; 5 folds; F1‖F2 pick features.
    pub train: TrainOptions,
    /// Synthetic user: durations, fixation statistics, scenario mix.
    pub user: GazeProfileParams,
    /// Threshold 0.55 (shared with the predictor), cap 1.3 s, tip 300 mm/s.
    pub controller: ControllerConfig,
    pub session: SessionSettings,
    pub simulation: SimulationSettings,
    pub layout: BoardLayout,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SessionSettings {
    /// Gripper animation, seconds.
    pub gripper_latency: f64,
    /// Trigger reach in mm; half a cell when unset.
    pub trigger_radius: Option<f64>,
}

impl Default for SessionSettings {
    fn default() -> Self {
        let d = SessionConfig::default();
        SessionSettings { gripper_latency: d.gripper_latency, trigger_radius: d.trigger_radius }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulationSettings {
    /// Speed at which the user drags a wrong tip to the real target, mm/s.
    pub correction_speed: f64,
}

impl Default for SimulationSettings {
    fn default() -> Self {
        SimulationSettings { correction_speed: SimConfig::default().correction_speed }
    }
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 7,
            attention: AttentionConfig::default(),
            train: TrainOptions::default(),
            user: GazeProfileParams::default(),
            controller: ControllerConfig::default(),
            session: SessionSettings::default(),
            simulation: SimulationSettings::default(),
            layout: BoardLayout::standard(),
        }
    }
}

impl RunConfig {
    /// Reads TOML, or JSON when the file name ends in `.json`.
    pub fn load(path: &Path) -> Result<RunConfig, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let cfg: RunConfig = if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json")) {
            serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?
        } else {
            toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.attention.validate().map_err(|e| CliError::Config(e.to_string()))?;
        self.train.params.validate().map_err(|e| CliError::Config(e.to_string()))?;
        if self.train.folds < 2 {
            return Err(CliError::Config("train.folds must be at least 2".into()));
        }
        self.user.validate().map_err(|e| CliError::Config(e.to_string()))?;
        self.controller.validate().map_err(CliError::Config)?;
        self.layout.validate().map_err(|e| CliError::Config(e.to_string()))?;
        self.session_config().validate().map_err(CliError::Config)?;
        if !(self.simulation.correction_speed > 0.0) {
            return Err(CliError::Config("simulation.correction_speed must be positive".into()));
        }
        Ok(())
    }

    pub fn predictor(&self) -> PredictorConfig {
        PredictorConfig { attention: self.attention, threshold: self.controller.threshold }
    }

    pub fn session_config(&self) -> SessionConfig {
        SessionConfig {
            predictor: self.predictor(),
            controller: self.controller,
            gripper_latency: self.session.gripper_latency,
            trigger_radius: self.session.trigger_radius,
            layout: self.layout.clone(),
            ..SessionConfig::default()
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}
