use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Cohort {
    Child,
    Adolescent,
    Adult,
}

impl Cohort {
    pub const ALL: [Cohort; 3] = [Cohort::Child, Cohort::Adolescent, Cohort::Adult];

    pub fn as_str(self) -> &'static str {
        match self {
            Cohort::Child => "child",
            Cohort::Adolescent => "adolescent",
            Cohort::Adult => "adult",
        }
    }
}

impl std::fmt::Display for Cohort {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Cohort {
    type Err = SimError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "child" => Ok(Cohort::Child),
            "adolescent" => Ok(Cohort::Adolescent),
            "adult" => Ok(Cohort::Adult),
            other => Err(SimError::InvalidInput(format!("unknown cohort `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiabetesType {
    T1d,
    T2dPump,
    T2dNoPump,
}

impl DiabetesType {
    pub const ALL: [DiabetesType; 3] =
        [DiabetesType::T1d, DiabetesType::T2dPump, DiabetesType::T2dNoPump];

    pub fn as_str(self) -> &'static str {
        match self {
            DiabetesType::T1d => "t1d",
            DiabetesType::T2dPump => "t2d_pump",
            DiabetesType::T2dNoPump => "t2d_no_pump",
        }
    }

    pub fn is_t2d(self) -> bool {
        !matches!(self, DiabetesType::T1d)
    }
}

impl std::fmt::Display for DiabetesType {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for DiabetesType {
    type Err = SimError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "t1d" => Ok(DiabetesType::T1d),
            "t2d" | "t2d_pump" => Ok(DiabetesType::T2dPump),
            "t2d_no_pump" | "t2d_nopump" => Ok(DiabetesType::T2dNoPump),
            other => Err(SimError::InvalidInput(format!("unknown diabetes type `{other}`"))),
        }
    }
}

/// Physiological and behavioural constants of one virtual patient.
///
/// Masses are per kg of body weight (mg/kg, pmol/kg), concentrations in
/// mg/dL and pmol/L, rates per minute. Column names of the patient table
/// are the field names below; the trailing `#[serde(skip)]` fields are
/// pipeline state set by tuning and adaptation, never read from disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatientParams {
    pub id: String,
    pub cohort: Cohort,
    pub age: f64,
    pub bw: f64,
    pub gb: f64,
    pub ib: f64,
    pub egpb: f64,
    pub vg: f64,
    pub vi: f64,
    /// Basal plasma and tissue glucose masses (mg/kg).
    pub gpb: f64,
    pub gtb: f64,

    // gut
    pub k_gri: f64,
    pub k_min: f64,
    pub k_max: f64,
    pub k_abs: f64,
    pub b_gut: f64,
    pub d_gut: f64,
    pub f: f64,

    // glucose kinetics
    pub k1: f64,
    pub k2: f64,
    pub k_p1: f64,
    pub k_p2: f64,
    pub k_p3: f64,
    pub k_e1: f64,
    pub k_e2: f64,
    pub v_m0: f64,
    pub v_mx: f64,
    pub k_m0: f64,
    pub f_snc: f64,

    // subcutaneous and plasma insulin kinetics
    pub ka1: f64,
    pub ka2: f64,
    pub kd: f64,
    pub m1: f64,
    pub m2: f64,
    pub m30: f64,
    pub m4: f64,

    // remote insulin action: T1D chain and T2D parallel compartments
    pub p_2u: f64,
    pub k_i: f64,
    pub si1: f64,
    pub si2: f64,
    pub si3: f64,
    pub ka_r1: f64,
    pub ka_r2: f64,
    pub ka_r3: f64,

    // endogenous secretion
    pub s_b_kg: f64,
    pub alpha_s: f64,
    pub beta_s: f64,
    pub h: f64,
    pub k_deriv: f64,
    pub tau_dg: f64,
    pub beta_cell: f64,

    // exercise
    pub tau_hr: f64,
    pub alpha_hr: f64,
    pub n_hr: f64,
    pub c1: f64,
    pub c2: f64,
    pub tau_ex: f64,
    pub tau_in: f64,
    pub beta_ex: f64,
    pub alpha_qe: f64,
    pub k_m_ex: f64,
    pub c_cap: f64,
    pub hr0: f64,

    pub k_sc: f64,

    // behaviour
    pub b_max: f64,
    pub m_max: f64,
    pub w_meal: f64,
    pub w_bolus: f64,
    pub max_meals_day: u32,
    pub max_boluses_day: u32,

    /// Basal infusion (U/h).
    pub basal_rate: f64,

    #[serde(skip)]
    pub tuned: bool,
    #[serde(skip)]
    pub diabetes_type: Option<DiabetesType>,
    /// Basal endogenous glucose production, whole body (mmol/min). T2D only.
    #[serde(skip)]
    pub egp0: f64,
    /// Insulin-independent CNS uptake, whole body (mmol/min). T2D only.
    #[serde(skip)]
    pub fcns0: f64,
    #[serde(skip)]
    pub insulin_resistance: f64,
}

impl PatientParams {
    pub fn hr_max(&self) -> f64 {
        220.0 - self.age
    }

    pub fn is_t2d(&self) -> bool {
        self.diabetes_type.map(DiabetesType::is_t2d).unwrap_or(false)
    }

    /// Basal endogenous production scaled to mg/kg/min (T2D form).
    pub fn egp0_mg(&self) -> f64 {
        180.0 * self.egp0 / self.bw
    }

    pub fn fcns_mg(&self) -> f64 {
        180.0 * self.fcns0 / self.bw
    }

    /// Residual beta-cell fraction used by the auxiliary forecaster.
    pub fn beta_func(&self) -> f64 {
        if self.is_t2d() {
            self.beta_cell.clamp(0.0, 1.0)
        } else {
            0.0
        }
    }

    /// Total daily dose estimate (U/day): twice the daily basal, with a
    /// weight-based basal substitute when the patient has no pump.
    pub fn total_daily_dose(&self) -> f64 {
        let basal = if self.basal_rate > 0.0 {
            self.basal_rate
        } else {
            0.011 * self.bw * self.insulin_resistance.max(1.0)
        };
        48.0 * basal
    }

    /// 1800-rule insulin sensitivity factor (mg/dL per U).
    pub fn isf(&self) -> f64 {
        1800.0 / self.total_daily_dose()
    }

    /// 500-rule carbohydrate ratio (g per U).
    pub fn carb_ratio(&self) -> f64 {
        500.0 / self.total_daily_dose()
    }

    /// Checks the record invariants; errors name the record.
    pub fn validate(&self) -> Result<()> {
        let bad = |reason: String| SimError::InvalidRecord {
            id: self.id.clone(),
            reason,
        };
        let positive = [
            ("age", self.age),
            ("bw", self.bw),
            ("gb", self.gb),
            ("ib", self.ib),
            ("egpb", self.egpb),
            ("vg", self.vg),
            ("vi", self.vi),
            ("gpb", self.gpb),
            ("gtb", self.gtb),
            ("k_gri", self.k_gri),
            ("k_min", self.k_min),
            ("k_max", self.k_max),
            ("k_abs", self.k_abs),
            ("b_gut", self.b_gut),
            ("d_gut", self.d_gut),
            ("k1", self.k1),
            ("k2", self.k2),
            ("k_p1", self.k_p1),
            ("k_p2", self.k_p2),
            ("k_p3", self.k_p3),
            ("k_e1", self.k_e1),
            ("k_e2", self.k_e2),
            ("v_m0", self.v_m0),
            ("v_mx", self.v_mx),
            ("k_m0", self.k_m0),
            ("f_snc", self.f_snc),
            ("ka1", self.ka1),
            ("ka2", self.ka2),
            ("kd", self.kd),
            ("m1", self.m1),
            ("m2", self.m2),
            ("m30", self.m30),
            ("m4", self.m4),
            ("p_2u", self.p_2u),
            ("k_i", self.k_i),
            ("si1", self.si1),
            ("si2", self.si2),
            ("si3", self.si3),
            ("ka_r1", self.ka_r1),
            ("ka_r2", self.ka_r2),
            ("ka_r3", self.ka_r3),
            ("alpha_s", self.alpha_s),
            ("beta_s", self.beta_s),
            ("h", self.h),
            ("k_deriv", self.k_deriv),
            ("tau_dg", self.tau_dg),
            ("tau_hr", self.tau_hr),
            ("alpha_hr", self.alpha_hr),
            ("n_hr", self.n_hr),
            ("c1", self.c1),
            ("c2", self.c2),
            ("tau_ex", self.tau_ex),
            ("tau_in", self.tau_in),
            ("beta_ex", self.beta_ex),
            ("alpha_qe", self.alpha_qe),
            ("k_m_ex", self.k_m_ex),
            ("c_cap", self.c_cap),
            ("hr0", self.hr0),
            ("k_sc", self.k_sc),
            ("b_max", self.b_max),
            ("m_max", self.m_max),
            ("w_meal", self.w_meal),
            ("w_bolus", self.w_bolus),
        ];
        for (name, value) in positive {
            if !(value.is_finite() && value > 0.0) {
                return Err(bad(format!("`{name}` must be positive and finite, got {value}")));
            }
        }
        for (name, value) in [
            ("s_b_kg", self.s_b_kg),
            ("beta_cell", self.beta_cell),
            ("basal_rate", self.basal_rate),
        ] {
            if !(value.is_finite() && value >= 0.0) {
                return Err(bad(format!("`{name}` must be non-negative, got {value}")));
            }
        }
        if !(self.f > 0.0 && self.f <= 1.0) {
            return Err(bad(format!("`f` must lie in (0, 1], got {}", self.f)));
        }
        if self.k_min > self.k_max {
            return Err(bad("`k_min` exceeds `k_max`".into()));
        }
        if self.b_gut >= 1.0 {
            return Err(bad("`b_gut` must be below 1".into()));
        }
        if self.hr_max() <= self.hr0 {
            return Err(bad("resting heart rate exceeds 220 - age".into()));
        }
        if self.max_meals_day == 0 || self.max_boluses_day == 0 {
            return Err(bad("daily caps must be positive".into()));
        }
        if self.diabetes_type == Some(DiabetesType::T1d)
            && (self.s_b_kg != 0.0 || self.beta_cell != 0.0)
        {
            return Err(bad("T1D record carries residual secretion".into()));
        }
        Ok(())
    }
}
