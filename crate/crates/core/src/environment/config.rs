//! Scenario configuration (TOML).

use serde::{Deserialize, Serialize};

use super::action::{ActionGrid, ExecutionNoise};
use super::schedule::ScheduleConfig;
use crate::error::{Result, SimError};
use crate::patients::{DiabetesType, GLOBAL_TUNING};
use crate::physiology::{CircadianConfig, OuConfig, SensorConfig};
use crate::reward::{ProxyConfig, RiskWeights};

/// A constant relative heart-rate intensity over `[start, end)` (absolute minutes).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExerciseBout {
    pub start: f64,
    pub end: f64,
    pub hr_rel: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScenarioConfig {
    pub seed: u64,
    pub patient_id: String,
    pub diabetes_type: DiabetesType,
    pub horizon_days: usize,
    /// Scale applied to Vg and the basal glucose masses before adaptation.
    pub tuning: f64,
    /// Carbohydrate drain rate from the pending buffer (g/min).
    pub carb_rate: f64,
    /// A scheduled meal this close after a controller meal is postponed (min).
    pub postpone_buffer: f64,
    /// Include known scheduled meals in proxy forecasts.
    pub forecast_scheduled_meals: bool,
    pub sensor: SensorConfig,
    pub process_noise: OuConfig,
    pub circadian: CircadianConfig,
    pub execution: ExecutionNoise,
    pub schedule: ScheduleConfig,
    pub grid: ActionGrid,
    pub proxy: ProxyConfig,
    pub risk: RiskWeights,
    pub exercise: Vec<ExerciseBout>,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            patient_id: "adult#001".into(),
            diabetes_type: DiabetesType::T1d,
            horizon_days: 1,
            tuning: GLOBAL_TUNING,
            carb_rate: 10.0,
            postpone_buffer: 30.0,
            forecast_scheduled_meals: true,
            sensor: SensorConfig::default(),
            process_noise: OuConfig::default(),
            circadian: CircadianConfig::default(),
            execution: ExecutionNoise::default(),
            schedule: ScheduleConfig::default(),
            grid: ActionGrid::default(),
            proxy: ProxyConfig::default(),
            risk: RiskWeights::default(),
            exercise: Vec::new(),
        }
    }
}

impl ScenarioConfig {
    /// Sensor, process and execution noise off, circadian modulation off.
    pub fn quiet(mut self) -> Self {
        self.sensor = SensorConfig::disabled();
        self.process_noise = OuConfig::disabled();
        self.execution.enabled = false;
        self.circadian = CircadianConfig::disabled();
        self
    }

    pub fn horizon_steps(&self) -> usize {
        self.horizon_days * 288
    }

    pub fn validate(&self) -> Result<()> {
        if self.horizon_days == 0 {
            return Err(SimError::Config("horizon_days must be at least 1".into()));
        }
        if !(self.carb_rate > 0.0) {
            return Err(SimError::Config("carb_rate must be positive".into()));
        }
        if self.proxy.step_min != 5 || self.proxy.horizon == 0 {
            return Err(SimError::Config("proxy must use 5-minute steps and a positive horizon".into()));
        }
        self.grid.validate()?;
        for b in &self.exercise {
            if !(0.0..=1.0).contains(&b.hr_rel) || b.end < b.start {
                return Err(SimError::Config(format!("invalid exercise bout {b:?}")));
            }
        }
        Ok(())
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| SimError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| SimError::Config(e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toml_round_trip_and_partial() {
        let cfg = ScenarioConfig::default();
        let text = cfg.to_toml_string().unwrap();
        assert_eq!(ScenarioConfig::from_toml_str(&text).unwrap(), cfg);
        let partial = ScenarioConfig::from_toml_str(
            "seed = 3\ndiabetes_type = \"t2d_no_pump\"\n[sensor]\nenabled = false\n",
        )
        .unwrap();
        assert_eq!(partial.seed, 3);
        assert!(!partial.sensor.enabled);
        assert_eq!(partial.sensor.noise_std, 2.0);
        assert!(ScenarioConfig::from_toml_str("horizon_days = 0").is_err());
    }
}
