//! Monte Carlo check of the predictive shield's reliability bound on a
//! synthetic dose-response problem.

use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::predictive::trajectory_extremes;
use crate::error::{Result, SimError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundSide {
    Hypo,
    Hyper,
}

/// Sampled initial condition of the synthetic dynamics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyntheticState {
    pub bg0: f64,
    /// mg/dL per step.
    pub slope: f64,
    /// mg/dL per U.
    pub isf: f64,
}

/// Ground-truth trajectories: linear drift plus a saturating insulin effect.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticOracle {
    pub bg_range: (f64, f64),
    pub slope_range: (f64, f64),
    pub isf_range: (f64, f64),
    /// Candidate bolus doses (U).
    pub doses: Vec<f64>,
    pub horizon: usize,
    /// Insulin action time constant (steps).
    pub tau: f64,
}

impl Default for SyntheticOracle {
    fn default() -> Self {
        Self {
            bg_range: (60.0, 300.0),
            slope_range: (-2.0, 2.0),
            isf_range: (20.0, 80.0),
            doses: vec![0.0, 0.5, 1.0, 2.0, 3.0, 4.0],
            horizon: 24,
            tau: 12.0,
        }
    }
}

impl SyntheticOracle {
    pub fn sample_state<R: Rng + ?Sized>(&self, rng: &mut R) -> SyntheticState {
        SyntheticState {
            bg0: rng.random_range(self.bg_range.0..self.bg_range.1),
            slope: rng.random_range(self.slope_range.0..self.slope_range.1),
            isf: rng.random_range(self.isf_range.0..self.isf_range.1),
        }
    }

    pub fn trajectory(&self, s: &SyntheticState, action: usize) -> Vec<f64> {
        let u = self.doses[action];
        (1..=self.horizon)
            .map(|k| {
                let k = k as f64;
                (s.bg0 + s.slope * k - u * s.isf * (1.0 - (-k / self.tau).exp())).max(10.0)
            })
            .collect()
    }
}

/// How the synthetic predictor errs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PredictorKind {
    /// Error in the unsafe direction stays within epsilon except on the
    /// designated unreliable trials, where it exceeds epsilon by up to `excess`.
    Reliable { excess: f64 },
    /// Always errs in the unsafe direction by `bias`, breaking the premise.
    Adversarial { bias: f64 },
}

impl PredictorKind {
    fn error<R: Rng + ?Sized>(&self, epsilon: f64, unreliable: bool, rng: &mut R) -> f64 {
        match *self {
            PredictorKind::Reliable { excess } => {
                if unreliable {
                    epsilon + rng.random_range(0.0..1.0) * excess + 1e-9
                } else if epsilon > 0.0 {
                    rng.random_range(-epsilon..=epsilon)
                } else {
                    0.0
                }
            }
            PredictorKind::Adversarial { bias } => bias,
        }
    }

    /// Prediction of `truth`; positive errors point toward the unsafe side
    /// (overestimation for hypo, underestimation for hyper).
    pub fn predict<R: Rng + ?Sized>(&self, truth: &[f64], epsilon: f64, unreliable: bool, side: BoundSide, rng: &mut R) -> Vec<f64> {
        let sign = match side {
            BoundSide::Hypo => 1.0,
            BoundSide::Hyper => -1.0,
        };
        truth.iter().map(|v| v + sign * self.error(epsilon, unreliable, rng)).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReliabilityConfig {
    pub epsilon: f64,
    pub alpha: f64,
    pub trials: usize,
    pub g_fail_lo: f64,
    pub g_fail_hi: f64,
    pub side: BoundSide,
}

impl ReliabilityConfig {
    pub fn new(epsilon: f64, alpha: f64, trials: usize, side: BoundSide) -> Self {
        Self {
            epsilon,
            alpha,
            trials,
            g_fail_lo: 70.0,
            g_fail_hi: 180.0,
            side,
        }
    }

    /// Pruning threshold placed epsilon inside the failure boundary.
    pub fn shield_threshold(&self) -> f64 {
        match self.side {
            BoundSide::Hypo => self.g_fail_lo + self.epsilon,
            BoundSide::Hyper => self.g_fail_hi - self.epsilon,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReliabilityReport {
    pub side: BoundSide,
    pub epsilon: f64,
    pub alpha: f64,
    pub trials: usize,
    pub unreliable_trials: usize,
    pub evaluated: usize,
    pub permitted: usize,
    pub violations: usize,
    /// Violations per permitted action.
    pub rate: f64,
    pub se: f64,
    /// No action was permitted in any trial.
    pub inconclusive: bool,
}

impl ReliabilityReport {
    /// `rate <= alpha + 2 SE`.
    pub fn within_bound(&self) -> bool {
        !self.inconclusive && self.rate <= self.alpha + 2.0 * self.se
    }
}

/// Samples `trials` states, screens every candidate dose with the predictor
/// and counts permitted actions whose true trajectory crosses the failure
/// boundary. Exactly `round(alpha * trials)` trials are unreliable.
pub fn verify_reliability_bound<R: Rng + ?Sized>(
    oracle: &SyntheticOracle,
    predictor: PredictorKind,
    cfg: &ReliabilityConfig,
    rng: &mut R,
) -> Result<ReliabilityReport> {
    if !(0.0..=1.0).contains(&cfg.alpha) || !(cfg.epsilon >= 0.0) {
        return Err(SimError::InvalidInput(format!(
            "need 0 <= alpha <= 1 and epsilon >= 0, got alpha {} epsilon {}",
            cfg.alpha, cfg.epsilon
        )));
    }
    if cfg.trials == 0 || oracle.doses.is_empty() {
        return Err(SimError::InvalidInput("need at least one trial and one action".into()));
    }
    let n_bad = ((cfg.alpha * cfg.trials as f64).round() as usize).min(cfg.trials);
    let mut bad = vec![false; cfg.trials];
    for i in sample(rng, cfg.trials, n_bad).iter() {
        bad[i] = true;
    }
    let threshold = cfg.shield_threshold();
    let (mut evaluated, mut permitted, mut violations) = (0usize, 0usize, 0usize);
    for &unreliable in &bad {
        let s = oracle.sample_state(rng);
        for a in 0..oracle.doses.len() {
            let truth = oracle.trajectory(&s, a);
            let pred = predictor.predict(&truth, cfg.epsilon, unreliable, cfg.side, rng);
            let (plo, phi) = trajectory_extremes(&pred)?;
            let (tlo, thi) = trajectory_extremes(&truth)?;
            evaluated += 1;
            let (allowed, violated) = match cfg.side {
                BoundSide::Hypo => (plo >= threshold, tlo < cfg.g_fail_lo),
                BoundSide::Hyper => (phi <= threshold, thi > cfg.g_fail_hi),
            };
            if allowed {
                permitted += 1;
                if violated {
                    violations += 1;
                }
            }
        }
    }
    let rate = if permitted == 0 { 0.0 } else { violations as f64 / permitted as f64 };
    let se = if permitted == 0 {
        0.0
    } else {
        (rate * (1.0 - rate) / permitted as f64).sqrt()
    };
    Ok(ReliabilityReport {
        side: cfg.side,
        epsilon: cfg.epsilon,
        alpha: cfg.alpha,
        trials: cfg.trials,
        unreliable_trials: n_bad,
        evaluated,
        permitted,
        violations,
        rate,
        se,
        inconclusive: permitted == 0,
    })
}
