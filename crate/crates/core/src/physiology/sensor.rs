//! Continuous glucose monitor model.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

/// Sensor output range (mg/dL).
pub const CGM_RANGE: (f64, f64) = (40.0, 400.0);
/// Allowed range of the multiplicative bias and scale factors.
pub const DRIFT_RANGE: (f64, f64) = (0.9, 1.1);

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SensorConfig {
    /// When false, readings are the exact interstitial concentration, clipped.
    pub enabled: bool,
    /// Additive Gaussian noise std (mg/dL).
    pub noise_std: f64,
    /// Per-reading dropout probability.
    pub dropout_prob: f64,
    /// Std of the per-reading bias random walk.
    pub bias_step_std: f64,
    /// Half-width of the uniform per-episode scale draw around 1.
    pub scale_spread: f64,
}

impl Default for SensorConfig {
    fn default() -> Self {
        Self {
            enabled: true,
            noise_std: 2.0,
            dropout_prob: 0.005,
            bias_step_std: 0.002,
            scale_spread: 0.03,
        }
    }
}

impl SensorConfig {
    pub fn disabled() -> Self {
        Self {
            enabled: false,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SensorState {
    pub bias: f64,
    pub scale: f64,
    /// Last emitted reading (mg/dL); NaN before the first reading.
    pub last_reading: f64,
    pub dropout_active: bool,
    /// Current process-noise value (mg/dL).
    pub ou_value: f64,
}

impl Default for SensorState {
    fn default() -> Self {
        Self {
            bias: 1.0,
            scale: 1.0,
            last_reading: f64::NAN,
            dropout_active: false,
            ou_value: 0.0,
        }
    }
}

impl SensorState {
    /// Fresh sensor with a per-episode scale factor.
    pub fn new<R: Rng + ?Sized>(cfg: &SensorConfig, rng: &mut R) -> Self {
        let mut s = Self::default();
        if cfg.enabled && cfg.scale_spread > 0.0 {
            let spread = cfg.scale_spread.min(0.1);
            s.scale = rng.random_range(1.0 - spread..=1.0 + spread);
        }
        s
    }
}

/// Produces one CGM reading (mg/dL) from interstitial glucose mass `gsc` (mg/kg).
pub fn cgm_read<R: Rng + ?Sized>(
    gsc: f64,
    vg: f64,
    sensor: &mut SensorState,
    cfg: &SensorConfig,
    rng: &mut R,
) -> f64 {
    let conc = gsc.max(0.0) / vg;
    if !cfg.enabled {
        let r = conc.clamp(CGM_RANGE.0, CGM_RANGE.1);
        sensor.dropout_active = false;
        sensor.last_reading = r;
        return r;
    }

    if cfg.bias_step_std > 0.0 {
        let z: f64 = rng.sample(StandardNormal);
        sensor.bias = (sensor.bias + cfg.bias_step_std * z).clamp(DRIFT_RANGE.0, DRIFT_RANGE.1);
    }
    let dropout = sensor.last_reading.is_finite() && rng.random::<f64>() < cfg.dropout_prob;
    let z: f64 = rng.sample(StandardNormal);
    sensor.dropout_active = dropout;
    if dropout {
        return sensor.last_reading;
    }
    let r = (sensor.scale * sensor.bias * conc + cfg.noise_std * z).clamp(CGM_RANGE.0, CGM_RANGE.1);
    sensor.last_reading = r;
    r
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn noise_off_identity_and_clip() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let cfg = SensorConfig::disabled();
        let mut s = SensorState::default();
        assert_eq!(cgm_read(120.0 * 1.8, 1.8, &mut s, &cfg, &mut rng), 120.0);
        assert_eq!(cgm_read(500.0 * 1.8, 1.8, &mut s, &cfg, &mut rng), 400.0);
        assert_eq!(cgm_read(10.0, 1.8, &mut s, &cfg, &mut rng), 40.0);
    }

    #[test]
    fn dropout_forward_fills() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let cfg = SensorConfig {
            dropout_prob: 1.0,
            ..SensorConfig::default()
        };
        let mut s = SensorState {
            last_reading: 150.0,
            ..SensorState::default()
        };
        assert_eq!(cgm_read(300.0, 1.8, &mut s, &cfg, &mut rng), 150.0);
        assert!(s.dropout_active);
    }

    #[test]
    fn drift_and_readings_stay_bounded() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let cfg = SensorConfig {
            bias_step_std: 0.05,
            ..SensorConfig::default()
        };
        let mut s = SensorState::new(&cfg, &mut rng);
        for k in 0..5000 {
            let gsc = 1.8 * (20.0 + (k % 600) as f64);
            let r = cgm_read(gsc, 1.8, &mut s, &cfg, &mut rng);
            assert!((40.0..=400.0).contains(&r));
            assert!((0.9..=1.1).contains(&s.bias));
            assert!((0.9..=1.1).contains(&s.scale));
        }
    }
}
