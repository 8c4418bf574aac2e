use serde::{Deserialize, Serialize};

use super::config::ShieldConfig;
use super::rules::ShieldInput;
use crate::environment::ActionGrid;
use crate::error::{Result, SimError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShieldMode {
    Rescue,
    /// Predictive verification paused near the hypoglycemia boundary.
    GatedOff,
    /// At least one logit was modified.
    Predictive,
    /// Distribution left unchanged.
    Pass,
}

impl ShieldMode {
    pub fn as_str(self) -> &'static str {
        match self {
            ShieldMode::Rescue => "rescue",
            ShieldMode::GatedOff => "gated_off",
            ShieldMode::Predictive => "predictive",
            ShieldMode::Pass => "pass",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateEval {
    pub bolus_idx: usize,
    pub meal_idx: usize,
    pub min_bg: f64,
    pub max_bg: f64,
    pub flagged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShieldDecision {
    pub mode: ShieldMode,
    pub bg: f64,
    pub candidates: Vec<CandidateEval>,
    pub mask: Vec<f64>,
    pub distribution: Vec<f64>,
    /// Forecaster unavailable; only static rules applied.
    pub fallback_static: bool,
}

impl ShieldDecision {
    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).unwrap_or_default()
    }
}

/// Numerically stable softmax. `-inf` entries get zero mass.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let mx = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !mx.is_finite() {
        return vec![1.0 / logits.len() as f64; logits.len()];
    }
    let e: Vec<f64> = logits.iter().map(|l| (l - mx).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

/// Minimum and maximum of a predicted trajectory.
pub fn trajectory_extremes(traj: &[f64]) -> Result<(f64, f64)> {
    if traj.is_empty() {
        return Err(SimError::InvalidInput("empty trajectory".into()));
    }
    Ok(traj.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v))))
}

/// Bolus indices ranked by marginal policy probability, ties to the lower
/// index.
pub fn top_bolus_indices(logits: &[f64], grid: &ActionGrid, k: usize) -> Vec<usize> {
    let p = softmax(logits);
    let mut marg: Vec<(usize, f64)> = (0..grid.n_bolus)
        .map(|b| (b, (0..grid.n_meal).map(|m| p[grid.flat(b, m)]).sum()))
        .collect();
    marg.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    marg.into_iter().take(k.min(grid.n_bolus)).map(|(b, _)| b).collect()
}

/// Forecasts the BG trajectory after taking (bolus_idx, meal_idx). An error
/// means no forecast is available.
pub type CandidateForecast<'a> = dyn FnMut(usize, usize) -> Result<Vec<f64>> + 'a;

/// Applies the rescue / gating / predictive rules to `logits` and returns the
/// masked logits with an audit record.
pub fn predictive_shield(
    input: &ShieldInput,
    logits: &[f64],
    grid: &ActionGrid,
    forecast: Option<&mut CandidateForecast<'_>>,
    cfg: &ShieldConfig,
) -> (Vec<f64>, ShieldDecision) {
    let bg = input.bg;
    let mut mask = vec![0.0; logits.len()];
    let mut candidates = Vec::new();
    let mut fallback_static = false;
    let mode;
    if bg < cfg.g_rescue {
        for (k, v) in mask.iter_mut().enumerate() {
            let (b, m) = grid.unflat(k);
            if b > 0 {
                *v = cfg.beta;
            } else if m == cfg.rescue_meal_idx {
                *v = cfg.rescue_boost;
            }
        }
        mode = ShieldMode::Rescue;
    } else if bg < cfg.g_shield_lo {
        mode = ShieldMode::GatedOff;
    } else {
        if bg >= cfg.g_fail_lo && bg <= cfg.g_fail_hi {
            for (k, v) in mask.iter_mut().enumerate() {
                if grid.unflat(k).0 >= cfg.safe_cap_idx {
                    *v = cfg.beta;
                }
            }
        }
        match forecast {
            None => fallback_static = true,
            Some(f) => {
                let top = top_bolus_indices(logits, grid, cfg.top_k);
                'outer: for &b in &top {
                    for m in 0..grid.n_meal {
                        let traj = match f(b, m) {
                            Ok(t) => t,
                            Err(_) => {
                                fallback_static = true;
                                candidates.clear();
                                break 'outer;
                            }
                        };
                        let h = cfg.horizon.min(traj.len());
                        let Ok((lo, hi)) = trajectory_extremes(&traj[..h]) else {
                            fallback_static = true;
                            candidates.clear();
                            break 'outer;
                        };
                        let flagged = lo < cfg.g_shield_lo || (cfg.prune_hyper && hi > cfg.g_shield_hi);
                        candidates.push(CandidateEval {
                            bolus_idx: b,
                            meal_idx: m,
                            min_bg: lo,
                            max_bg: hi,
                            flagged,
                        });
                    }
                }
                for c in candidates.iter().filter(|c| c.flagged) {
                    mask[grid.flat(c.bolus_idx, c.meal_idx)] = cfg.beta;
                }
            }
        }
        mode = if mask.iter().any(|v| *v != 0.0) {
            ShieldMode::Predictive
        } else {
            ShieldMode::Pass
        };
    }
    let masked: Vec<f64> = logits.iter().zip(&mask).map(|(l, m)| l + m).collect();
    let distribution = softmax(&masked);
    let decision = ShieldDecision {
        mode,
        bg,
        candidates,
        mask,
        distribution,
        fallback_static,
    };
    (masked, decision)
}
