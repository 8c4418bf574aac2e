//! Baseline controllers producing logits over the bolus × meal grid.

use glucoshield::environment::{ActionGrid, Environment, Observation, ScenarioConfig};
use glucoshield::patients::PatientParams;
use glucoshield::reward::ProxyModel;
use glucoshield::Result;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyKind {
    Heuristic,
    Random,
    Constant,
}

impl PolicyKind {
    pub fn as_str(self) -> &'static str {
        match self {
            PolicyKind::Heuristic => "heuristic",
            PolicyKind::Random => "random",
            PolicyKind::Constant => "constant",
        }
    }
}

impl std::str::FromStr for PolicyKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "heuristic" => Ok(PolicyKind::Heuristic),
            "random" => Ok(PolicyKind::Random),
            "constant" => Ok(PolicyKind::Constant),
            other => Err(format!("unknown policy `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PolicySpec {
    pub kind: PolicyKind,
    /// mg/dL.
    pub target: f64,
    /// Correction factor (mg/dL per U); calibrated on the training patient when unset.
    pub correction_factor: Option<f64>,
    /// Carbohydrate ratio (g per U); calibrated on the training patient when unset.
    pub carb_ratio: Option<f64>,
    /// Logit softness; smaller is sharper.
    pub temperature: f64,
    /// CGM below which a rescue meal is requested.
    pub low_bg: f64,
    /// No meal bolus below this CGM.
    pub pre_bolus_min_bg: f64,
    /// Rescue meal size (g).
    pub rescue_g: f64,
    /// Only correct above this CGM.
    pub correction_threshold: f64,
    /// Action index pair used by the constant policy.
    pub constant_action: (usize, usize),
}

impl Default for PolicySpec {
    fn default() -> Self {
        Self {
            kind: PolicyKind::Heuristic,
            target: 120.0,
            correction_factor: None,
            carb_ratio: None,
            temperature: 0.15,
            low_bg: 90.0,
            pre_bolus_min_bg: 70.0,
            rescue_g: 15.0,
            correction_threshold: 150.0,
            constant_action: (0, 0),
        }
    }
}

impl PolicySpec {
    pub fn validate(&self) -> std::result::Result<(), String> {
        let pos = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(format!("policy {name} must be positive, got {v}"))
            }
        };
        pos("target", self.target)?;
        pos("temperature", self.temperature)?;
        pos("rescue_g", self.rescue_g)?;
        if let Some(v) = self.correction_factor {
            pos("correction_factor", v)?;
        }
        if let Some(v) = self.carb_ratio {
            pos("carb_ratio", v)?;
        }
        Ok(())
    }
}

/// Dosing sensitivities measured on a patient.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DosingCalibration {
    /// Largest BG drop per unit after a lone bolus (mg/dL per U).
    pub cf: f64,
    /// Grams covered by one unit: `cf` over the peak rise per gram.
    pub cr: f64,
}

impl DosingCalibration {
    /// Peak BG rise per gram (mg/dL per g).
    pub fn rise_per_gram(&self) -> f64 {
        self.cf / self.cr
    }

    /// `proxy` rescaled so its total insulin and carbohydrate effects match
    /// the measured ones.
    pub fn anchor(&self, proxy: &ProxyModel) -> ProxyModel {
        proxy.scaled(self.rise_per_gram() / proxy.csf, self.cf / proxy.isf)
    }
}

/// Measures `cf` and `cr` on `p` (adapted) with noise, circadian variation and
/// scheduled meals off, from a lone bolus and a lone meal over six hours.
pub fn calibrate_dosing(p: &PatientParams, scenario: &ScenarioConfig) -> Result<DosingCalibration> {
    const STEPS: usize = 72;
    let mut sc = scenario.clone().quiet();
    sc.horizon_days = 1;
    sc.patient_id = p.id.clone();
    sc.schedule.cohort_scale = [0.0; 3];
    sc.exercise.clear();

    let mut env = Environment::new(p.clone(), sc.clone())?;
    let g0 = env.bg();
    env.step(1, 0)?;
    let units = env.record().steps[0].action.accepted_bolus;
    let mut low = g0;
    for _ in 0..STEPS {
        if env.is_terminated() {
            break;
        }
        env.step(0, 0)?;
        low = low.min(env.bg());
    }

    let mut env = Environment::new(p.clone(), sc.clone())?;
    env.step(0, sc.grid.n_meal - 1)?;
    let grams = env.record().steps[0].action.accepted_meal;
    let mut high = g0;
    for _ in 0..STEPS {
        if env.is_terminated() {
            break;
        }
        env.step(0, 0)?;
        high = high.max(env.bg());
    }
    let cf = (g0 - low) / units;
    let per_gram = (high - g0) / grams;
    if !(cf > 0.0 && per_gram > 0.0) {
        return Err(glucoshield::SimError::Config(format!(
            "dosing calibration failed for `{}` (cf {cf}, rise per g {per_gram})",
            p.id
        )));
    }
    Ok(DosingCalibration { cf, cr: cf / per_gram })
}

/// A policy bound to the dosing it was tuned with and the patient it acts for.
#[derive(Debug, Clone)]
pub struct Policy {
    pub spec: PolicySpec,
    cf: f64,
    cr: f64,
    b_max: f64,
    m_max: f64,
}

impl Policy {
    /// `cal` supplies unset dosing parameters; `actor` supplies the action scaling.
    pub fn new(spec: PolicySpec, cal: DosingCalibration, actor: &PatientParams) -> Self {
        Self {
            cf: spec.correction_factor.unwrap_or(cal.cf),
            cr: spec.carb_ratio.unwrap_or(cal.cr),
            b_max: actor.b_max,
            m_max: actor.m_max,
            spec,
        }
    }

    pub fn correction_factor(&self) -> f64 {
        self.cf
    }

    pub fn carb_ratio(&self) -> f64 {
        self.cr
    }

    /// Desired bolus (U) and meal (g) before discretisation.
    pub fn desired(&self, obs: &Observation) -> (f64, f64) {
        let s = &self.spec;
        let mut bolus = 0.0;
        let meal_due = obs.pre_bolus_flag > 0.5 && obs.cgm >= s.pre_bolus_min_bg;
        if obs.cgm > s.correction_threshold {
            bolus += (obs.cgm - s.target) / self.cf;
        }
        if meal_due {
            bolus += obs.next_meal_size_norm * self.m_max / self.cr;
        }
        bolus = (bolus - obs.iob_bolus).max(0.0);
        let falling = obs.cgm_trend < 0.0;
        let meal = if obs.cgm < s.low_bg && (falling || obs.cgm < s.low_bg - 10.0) {
            s.rescue_g
        } else {
            0.0
        };
        (bolus, meal)
    }

    pub fn logits(&self, obs: &Observation, grid: &ActionGrid) -> Vec<f64> {
        match self.spec.kind {
            PolicyKind::Random => vec![0.0; grid.size()],
            PolicyKind::Constant => {
                let (b, m) = self.spec.constant_action;
                let target = grid.flat(b.min(grid.n_bolus - 1), m.min(grid.n_meal - 1));
                (0..grid.size())
                    .map(|k| if k == target { 0.0 } else { -1.0 / self.spec.temperature })
                    .collect()
            }
            PolicyKind::Heuristic => {
                let (bolus, meal) = self.desired(obs);
                let xb = (bolus / self.b_max).min(1.0) * (grid.n_bolus - 1) as f64;
                let xm = (meal / self.m_max).min(1.0) * (grid.n_meal - 1) as f64;
                let t = self.spec.temperature;
                let mut out = Vec::with_capacity(grid.size());
                for b in 0..grid.n_bolus {
                    for m in 0..grid.n_meal {
                        let db = b as f64 - xb;
                        let dm = m as f64 - xm;
                        out.push(-(db * db + dm * dm) / t);
                    }
                }
                out
            }
        }
    }
}

/// Index of the largest value, ties to the lowest index.
pub fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if *x > v[best] {
            best = i;
        }
    }
    best
}
