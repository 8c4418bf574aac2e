use serde::{Deserialize, Serialize};

use super::config::RuleConfig;
use crate::environment::{ActionGrid, Observation};

/// What the shields read from the current observation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShieldInput {
    /// mg/dL.
    pub bg: f64,
    /// mg/dL per step.
    pub trend: f64,
    /// U.
    pub iob: f64,
}

impl From<&Observation> for ShieldInput {
    fn from(o: &Observation) -> Self {
        Self {
            bg: o.cgm,
            trend: o.cgm_trend,
            iob: o.iob_bolus,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RuleFired {
    Rescue,
    HyperCorrection,
    Suspend,
    None,
}

impl RuleFired {
    pub fn as_str(self) -> &'static str {
        match self {
            RuleFired::Rescue => "rule_rescue",
            RuleFired::HyperCorrection => "rule_hyper",
            RuleFired::Suspend => "rule_suspend",
            RuleFired::None => "pass",
        }
    }
}

/// Which rule applies, checked in priority order.
pub fn rule_for(input: &ShieldInput, cfg: &RuleConfig) -> RuleFired {
    if input.bg < cfg.rescue_bg {
        RuleFired::Rescue
    } else if input.bg > cfg.hyper_bg && input.iob < cfg.iob_safe {
        RuleFired::HyperCorrection
    } else if input.bg < cfg.suspend_bg && input.trend < 0.0 {
        RuleFired::Suspend
    } else {
        RuleFired::None
    }
}

/// Threshold-suspend style masking of `logits` (flat, bolus-major).
pub fn rule_based_shield(input: &ShieldInput, logits: &[f64], grid: &ActionGrid, cfg: &RuleConfig) -> (Vec<f64>, RuleFired) {
    let rule = rule_for(input, cfg);
    let mut out = logits.to_vec();
    for (k, l) in out.iter_mut().enumerate() {
        let (b, m) = grid.unflat(k);
        match rule {
            RuleFired::Rescue => {
                if b > 0 || m != cfg.rescue_meal_idx {
                    *l = f64::NEG_INFINITY;
                }
            }
            RuleFired::HyperCorrection => {
                if b == 0 {
                    *l -= cfg.penalty;
                }
            }
            RuleFired::Suspend => {
                if b > 0 {
                    *l -= cfg.penalty;
                }
            }
            RuleFired::None => {}
        }
    }
    (out, rule)
}
