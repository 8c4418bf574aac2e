//! Ornstein-Uhlenbeck process noise.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

/// Process noise settings. `sigma = 0` disables the process.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OuConfig {
    pub theta: f64,
    pub sigma: f64,
}

impl Default for OuConfig {
    fn default() -> Self {
        Self {
            theta: 0.05,
            sigma: 0.5,
        }
    }
}

impl OuConfig {
    pub fn disabled() -> Self {
        Self {
            sigma: 0.0,
            ..Self::default()
        }
    }
}

/// Euler-Maruyama step of a zero-mean OU process.
pub fn ou_step<R: Rng + ?Sized>(ou: f64, theta: f64, sigma: f64, dt: f64, rng: &mut R) -> f64 {
    let drift = ou - theta * ou * dt;
    if sigma == 0.0 {
        return drift;
    }
    let z: f64 = rng.sample(StandardNormal);
    drift + sigma * dt.sqrt() * z
}
