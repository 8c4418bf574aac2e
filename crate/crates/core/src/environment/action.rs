//! Discrete action grid and the acceptance gates.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BlockReason {
    Refractory,
    CgmGate,
    DailyCap,
    HypoOverride,
    Exercise,
}

impl BlockReason {
    pub fn as_str(self) -> &'static str {
        match self {
            BlockReason::Refractory => "refractory",
            BlockReason::CgmGate => "cgm_gate",
            BlockReason::DailyCap => "daily_cap",
            BlockReason::HypoOverride => "hypo_override",
            BlockReason::Exercise => "exercise",
        }
    }
}

/// `n_bolus x n_meal` levels, each linear over [0, 1] including 0.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ActionGrid {
    pub n_bolus: usize,
    pub n_meal: usize,
}

impl Default for ActionGrid {
    fn default() -> Self {
        Self { n_bolus: 6, n_meal: 5 }
    }
}

impl ActionGrid {
    pub fn size(&self) -> usize {
        self.n_bolus * self.n_meal
    }

    pub fn bolus_level(&self, i: usize) -> f64 {
        level(i, self.n_bolus)
    }

    pub fn meal_level(&self, j: usize) -> f64 {
        level(j, self.n_meal)
    }

    /// Row-major flat index, bolus-major.
    pub fn flat(&self, bolus_idx: usize, meal_idx: usize) -> usize {
        bolus_idx * self.n_meal + meal_idx
    }

    pub fn unflat(&self, k: usize) -> (usize, usize) {
        (k / self.n_meal, k % self.n_meal)
    }

    /// Meal level closest to `grams` given `m_max`, never the zero level.
    pub fn nearest_meal_idx(&self, grams: f64, m_max: f64) -> usize {
        let target = grams / m_max;
        (1..self.n_meal)
            .min_by(|&a, &b| {
                (self.meal_level(a) - target)
                    .abs()
                    .total_cmp(&(self.meal_level(b) - target).abs())
            })
            .unwrap_or(0)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_bolus < 2 || self.n_meal < 2 {
            return Err(SimError::Config("action grid needs at least 2 levels per axis".into()));
        }
        Ok(())
    }
}

fn level(i: usize, n: usize) -> f64 {
    if n <= 1 {
        0.0
    } else {
        i as f64 / (n - 1) as f64
    }
}

/// A recommendation on the grid together with its acceptance outcome.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ActionPair {
    pub bolus_idx: usize,
    pub meal_idx: usize,
    pub bolus_norm: f64,
    pub meal_norm: f64,
    /// Executed bolus (U) and meal (g).
    pub accepted_bolus: f64,
    pub accepted_meal: f64,
    pub bolus_blocked: Option<BlockReason>,
    pub meal_blocked: Option<BlockReason>,
    /// The meal was executed through the hypoglycemia override.
    pub meal_forced: bool,
}

impl ActionPair {
    pub fn new(grid: &ActionGrid, bolus_idx: usize, meal_idx: usize) -> Result<Self> {
        if bolus_idx >= grid.n_bolus || meal_idx >= grid.n_meal {
            return Err(SimError::InvalidInput(format!(
                "action ({bolus_idx}, {meal_idx}) outside the {}x{} grid",
                grid.n_bolus, grid.n_meal
            )));
        }
        Ok(Self {
            bolus_idx,
            meal_idx,
            bolus_norm: grid.bolus_level(bolus_idx),
            meal_norm: grid.meal_level(meal_idx),
            accepted_bolus: 0.0,
            accepted_meal: 0.0,
            bolus_blocked: None,
            meal_blocked: None,
            meal_forced: false,
        })
    }

    pub fn noop() -> Self {
        Self {
            bolus_idx: 0,
            meal_idx: 0,
            bolus_norm: 0.0,
            meal_norm: 0.0,
            accepted_bolus: 0.0,
            accepted_meal: 0.0,
            bolus_blocked: None,
            meal_blocked: None,
            meal_forced: false,
        }
    }

    /// First block reason, bolus before meal.
    pub fn blocked_reason(&self) -> Option<BlockReason> {
        self.bolus_blocked.or(self.meal_blocked)
    }
}

/// Everything the gates look at.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GateContext {
    pub cgm: f64,
    /// Current absolute minute.
    pub t: f64,
    pub last_meal: Option<f64>,
    pub last_bolus: Option<f64>,
    pub meals_today: u32,
    pub boluses_today: u32,
    pub max_meals: u32,
    pub max_boluses: u32,
    pub w_meal: f64,
    pub w_bolus: f64,
    pub b_max: f64,
    pub m_max: f64,
    pub exercise_active: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExecutionNoise {
    pub enabled: bool,
    pub meal_sigma: f64,
    pub insulin_sigma: f64,
}

impl Default for ExecutionNoise {
    fn default() -> Self {
        Self {
            enabled: true,
            meal_sigma: 0.10,
            insulin_sigma: 0.01,
        }
    }
}

pub const HYPO_CGM: f64 = 70.0;
pub const MEAL_GATE_CGM: f64 = 200.0;

/// Applies, in order: hypoglycemia override, refractory windows, CGM gates,
/// daily caps and meal/exercise exclusion, then scales and perturbs.
///
/// Two standard normals are always drawn so the stream stays aligned
/// regardless of the outcome.
pub fn accept_action<R: Rng + ?Sized>(
    a: &ActionPair,
    ctx: &GateContext,
    noise: &ExecutionNoise,
    rng: &mut R,
) -> ActionPair {
    let z_meal: f64 = rng.sample(StandardNormal);
    let z_bolus: f64 = rng.sample(StandardNormal);
    let mut out = *a;
    out.accepted_bolus = 0.0;
    out.accepted_meal = 0.0;
    out.bolus_blocked = None;
    out.meal_blocked = None;
    out.meal_forced = false;

    let want_meal = a.meal_norm > 0.0;
    let want_bolus = a.bolus_norm > 0.0;
    let hypo = ctx.cgm < HYPO_CGM;
    let within = |last: Option<f64>, w: f64| last.map(|l| ctx.t - l < w).unwrap_or(false);

    if want_meal {
        if hypo {
            out.meal_forced = true;
        } else if within(ctx.last_meal, ctx.w_meal) {
            out.meal_blocked = Some(BlockReason::Refractory);
        } else if ctx.cgm > MEAL_GATE_CGM {
            out.meal_blocked = Some(BlockReason::CgmGate);
        } else if ctx.meals_today >= ctx.max_meals {
            out.meal_blocked = Some(BlockReason::DailyCap);
        } else if ctx.exercise_active {
            out.meal_blocked = Some(BlockReason::Exercise);
        }
    }
    if want_bolus {
        if hypo {
            out.bolus_blocked = Some(if want_meal {
                BlockReason::HypoOverride
            } else {
                BlockReason::CgmGate
            });
        } else if within(ctx.last_bolus, ctx.w_bolus) {
            out.bolus_blocked = Some(BlockReason::Refractory);
        } else if ctx.boluses_today >= ctx.max_boluses {
            out.bolus_blocked = Some(BlockReason::DailyCap);
        }
    }

    let perturb = |x: f64, sigma: f64, z: f64| {
        if noise.enabled {
            (x * (1.0 + sigma * z)).max(0.0)
        } else {
            x
        }
    };
    if want_meal && out.meal_blocked.is_none() {
        out.accepted_meal = perturb(a.meal_norm * ctx.m_max, noise.meal_sigma, z_meal);
    }
    if want_bolus && out.bolus_blocked.is_none() {
        out.accepted_bolus = perturb(a.bolus_norm * ctx.b_max, noise.insulin_sigma, z_bolus);
    }
    out
}
