use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ShieldConfig {
    pub g_rescue: f64,
    pub g_shield_lo: f64,
    pub g_shield_hi: f64,
    pub g_fail_lo: f64,
    pub g_fail_hi: f64,
    /// Additive logit penalty on unsafe actions.
    pub beta: f64,
    pub top_k: usize,
    /// Forecast horizon in steps.
    pub horizon: usize,
    pub rescue_meal_idx: usize,
    pub rescue_boost: f64,
    /// Bolus indices at or above this get `beta` while BG is in the safe range.
    pub safe_cap_idx: usize,
    /// Also flag candidates whose forecast peak exceeds `g_shield_hi`.
    pub prune_hyper: bool,
}

impl Default for ShieldConfig {
    fn default() -> Self {
        Self {
            g_rescue: 60.0,
            g_shield_lo: 80.0,
            g_shield_hi: 170.0,
            g_fail_lo: 70.0,
            g_fail_hi: 180.0,
            beta: -10.0,
            top_k: 3,
            horizon: 24,
            rescue_meal_idx: 1,
            rescue_boost: 10.0,
            safe_cap_idx: 2,
            prune_hyper: true,
        }
    }
}

impl ShieldConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.g_fail_lo < self.g_shield_lo) {
            return Err(SimError::Config("g_fail_lo must be below g_shield_lo".into()));
        }
        if !(self.g_shield_hi < self.g_fail_hi) {
            return Err(SimError::Config("g_shield_hi must be below g_fail_hi".into()));
        }
        if !(self.g_rescue <= self.g_shield_lo) {
            return Err(SimError::Config("g_rescue must not exceed g_shield_lo".into()));
        }
        if !(self.beta < 0.0) {
            return Err(SimError::Config("beta must be negative".into()));
        }
        if !(self.rescue_boost >= 0.0 && self.rescue_boost.is_finite()) {
            return Err(SimError::Config("rescue_boost must be finite and non-negative".into()));
        }
        if self.top_k == 0 || self.horizon == 0 {
            return Err(SimError::Config("top_k and horizon must be positive".into()));
        }
        Ok(())
    }
}

/// Thresholds of the rule-based shield.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RuleConfig {
    pub rescue_bg: f64,
    pub hyper_bg: f64,
    pub iob_safe: f64,
    pub suspend_bg: f64,
    pub rescue_meal_idx: usize,
    /// Finite penalty used for forcing and blocking.
    pub penalty: f64,
}

impl Default for RuleConfig {
    fn default() -> Self {
        Self {
            rescue_bg: 70.0,
            hyper_bg: 250.0,
            iob_safe: 2.0,
            suspend_bg: 100.0,
            rescue_meal_idx: 1,
            penalty: 100.0,
        }
    }
}
