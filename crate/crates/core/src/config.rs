//! TOML configuration for the simulator. Every table and key is optional;
//! missing values fall back to the built-in defaults.
//!
//! ```toml
//! timeout_s = 600.0
//!
//! [scene]
//! dt_s = 0.01
//! max_step_mm = 5.0
//! max_step_deg = 2.0
//! slip_bias_mm = 1.0
//! home = { x = -400.0, y = 0.0, z = 0.0, pitch = 0.0, yaw = 0.0, roll = 0.0 }
//! bays = [{ x = 0.0, y = -60.0, z = 0.0, pitch = 0.0, yaw = 0.0, roll = 0.0 },
//!         { x = 0.0, y = 60.0, z = 0.0, pitch = 0.0, yaw = 0.0, roll = 0.0 }]
//!
//! [mechanism]
//! k_contact = 10.0
//! [mechanism.latch]
//! f_lock_preload = 10.0
//! c_fric = 0.2
//! f_normal = 5.0
//! f_release = 15.0
//! [mechanism.interface]
//! f_residual = 2.0
//! mu_interface = 0.1
//! n_interface = 30.0
//! [mechanism.envelope]
//! engage_trans_tol = 3.0
//! engage_tilt_tol = 5.0
//! trigger_tilt_tol = 5.0
//! collision_trans_threshold = 8.0
//! eject_trans_threshold = 12.0
//! slip_force_threshold = 40.0
//!
//! [fsm]
//! approach_corridor_mm = 20.0
//! retract_hysteresis_mm = 1.0
//! withdraw_clearance_mm = 30.0
//! insertion_depth_mm = 40.0
//! bay_face_radius_mm = 50.0
//! staging_radius_mm = 60.0
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fsm::FsmConfig;
use crate::mechanism::{MechanismConfig, MechanismError};
use crate::scene::{SceneConfig, SceneError};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("reading {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("parsing config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error(transparent)]
    Scene(#[from] SceneError),
    #[error(transparent)]
    Mechanism(#[from] MechanismError),
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimConfig {
    /// Sim-time budget for one trial before it is recorded as a timeout.
    pub timeout_s: f64,
    pub scene: SceneConfig,
    pub mechanism: MechanismConfig,
    pub fsm: FsmConfig,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            timeout_s: 600.0,
            scene: SceneConfig::default(),
            mechanism: MechanismConfig::default(),
            fsm: FsmConfig::default(),
        }
    }
}

impl SimConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        let cfg: SimConfig = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|source| ConfigError::Io { path: path.display().to_string(), source })?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(self).expect("config is always representable")
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.scene.validate()?;
        self.mechanism.validate()?;
        if !(self.timeout_s.is_finite() && self.timeout_s > 0.0) {
            return Err(ConfigError::Invalid("timeout_s must be positive".into()));
        }
        let f = &self.fsm;
        let lengths = [
            f.approach_corridor_mm,
            f.retract_hysteresis_mm,
            f.withdraw_clearance_mm,
            f.insertion_depth_mm,
            f.bay_face_radius_mm,
            f.staging_radius_mm,
        ];
        if !lengths.iter().all(|v| v.is_finite() && *v > 0.0) {
            return Err(ConfigError::Invalid("fsm distances must be positive".into()));
        }
        if f.approach_corridor_mm <= self.scene.max_step_mm {
            return Err(ConfigError::Invalid(
                "approach corridor must be longer than one translation step".into(),
            ));
        }
        Ok(())
    }

    pub fn timeout_ticks(&self) -> u64 {
        (self.timeout_s / self.scene.dt_s).round() as u64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_is_default() {
        assert_eq!(SimConfig::from_toml_str("").unwrap(), SimConfig::default());
    }

    #[test]
    fn documented_example_parses() {
        let doc = include_str!("config.rs");
        let example: String = doc
            .lines()
            .skip_while(|l| !l.starts_with("//! ```toml"))
            .skip(1)
            .take_while(|l| !l.starts_with("//! ```"))
            .map(|l| l.trim_start_matches("//!").trim_start())
            .collect::<Vec<_>>()
            .join("\n");
        assert_eq!(SimConfig::from_toml_str(&example).unwrap(), SimConfig::default());
    }

    #[test]
    fn partial_override() {
        let cfg = SimConfig::from_toml_str("[mechanism.envelope]\nengage_trans_tol = 2.5\n").unwrap();
        assert_eq!(cfg.mechanism.envelope.engage_trans_tol, 2.5);
        assert_eq!(cfg.mechanism.envelope.collision_trans_threshold, 8.0);
    }

    #[test]
    fn round_trips_through_toml() {
        let cfg = SimConfig::default();
        assert_eq!(SimConfig::from_toml_str(&cfg.to_toml_string()).unwrap(), cfg);
    }

    #[test]
    fn invalid_values_rejected() {
        assert!(matches!(
            SimConfig::from_toml_str("[scene]\nbays = [{x=1.0,y=1.0,z=1.0},{x=1.0,y=1.0,z=1.0}]\n"),
            Err(ConfigError::Scene(SceneError::CoincidentBays { .. }))
        ));
        assert!(matches!(
            SimConfig::from_toml_str("[mechanism.latch]\nc_fric = 3.0\n"),
            Err(ConfigError::Mechanism(_))
        ));
        assert!(SimConfig::from_toml_str("timeout_s = -1.0").is_err());
        assert!(SimConfig::from_toml_str("[scene\n").is_err());
    }
}
