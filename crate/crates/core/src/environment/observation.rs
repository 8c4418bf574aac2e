//! The 14-component agent observation.

use serde::{Deserialize, Serialize};

use super::schedule::MealEvent;

pub const OBS_DIM: usize = 14;

pub const OBS_NAMES: [&str; OBS_DIM] = [
    "cgm",
    "iob_bolus",
    "cob",
    "cgm_trend",
    "sin_t",
    "cos_t",
    "tsm_norm",
    "tsb_norm",
    "pending_meal_norm",
    "meal_count_norm",
    "bolus_count_norm",
    "time_until_meal_norm",
    "next_meal_size_norm",
    "pre_bolus_flag",
];

/// Insulin-on-board duration (minutes).
pub const IOB_DURATION: f64 = 240.0;
/// Normalisation horizon for time-since and look-ahead features (minutes).
pub const TIME_NORM: f64 = 180.0;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Observation {
    pub cgm: f64,
    pub iob_bolus: f64,
    pub cob: f64,
    pub cgm_trend: f64,
    pub sin_t: f64,
    pub cos_t: f64,
    pub tsm_norm: f64,
    pub tsb_norm: f64,
    pub pending_meal_norm: f64,
    pub meal_count_norm: f64,
    pub bolus_count_norm: f64,
    pub time_until_meal_norm: f64,
    pub next_meal_size_norm: f64,
    pub pre_bolus_flag: f64,
}

impl Observation {
    pub fn to_array(&self) -> [f64; OBS_DIM] {
        [
            self.cgm,
            self.iob_bolus,
            self.cob,
            self.cgm_trend,
            self.sin_t,
            self.cos_t,
            self.tsm_norm,
            self.tsb_norm,
            self.pending_meal_norm,
            self.meal_count_norm,
            self.bolus_count_norm,
            self.time_until_meal_norm,
            self.next_meal_size_norm,
            self.pre_bolus_flag,
        ]
    }

    /// Components that must lie in [0, 1].
    pub fn normalized(&self) -> [f64; 8] {
        [
            self.tsm_norm,
            self.tsb_norm,
            self.pending_meal_norm,
            self.meal_count_norm,
            self.bolus_count_norm,
            self.time_until_meal_norm,
            self.next_meal_size_norm,
            self.pre_bolus_flag,
        ]
    }
}

/// Linear decay from 1 at `dt = 0` to 0 at [`IOB_DURATION`].
pub fn iob_kernel(dt: f64) -> f64 {
    if dt < 0.0 {
        0.0
    } else {
        (1.0 - dt / IOB_DURATION).max(0.0)
    }
}

/// Remaining active insulin (U) from `(time, units)` boluses.
pub fn bolus_iob(boluses: &[(f64, f64)], t: f64) -> f64 {
    boluses
        .iter()
        .rev()
        .take_while(|(tk, _)| t - tk < IOB_DURATION)
        .map(|&(tk, b)| b * iob_kernel(t - tk))
        .sum()
}

/// Active basal insulin (U) for a constant rate (U/h) delivered every minute.
pub fn basal_iob(rate_u_h: f64) -> f64 {
    let per_min = rate_u_h / 60.0;
    (1..IOB_DURATION as usize).map(|d| per_min * iob_kernel(d as f64)).sum()
}

/// Everything the observation is built from.
#[derive(Debug, Clone, Copy)]
pub struct ObservationInputs<'a> {
    pub t: f64,
    pub cgm: f64,
    pub prev_cgm: Option<f64>,
    pub step_min: f64,
    /// Gut mass (D1 + D2 + D3) in mg.
    pub gut_mg: f64,
    pub boluses: &'a [(f64, f64)],
    pub last_meal: Option<f64>,
    pub last_bolus: Option<f64>,
    pub pending_g: f64,
    pub meals_today: u32,
    pub boluses_today: u32,
    pub max_meals: u32,
    pub max_boluses: u32,
    pub m_max: f64,
    pub next_meal: Option<MealEvent>,
}

pub fn build_observation(inp: &ObservationInputs) -> Observation {
    let phase = 2.0 * std::f64::consts::PI * (inp.t.rem_euclid(1440.0)) / 1440.0;
    let since = |last: Option<f64>| match last {
        Some(l) => ((inp.t - l) / TIME_NORM).clamp(0.0, 1.0),
        None => 1.0,
    };
    let (until, size, flag) = match inp.next_meal {
        Some(m) => {
            let dt = (m.time - inp.t).max(0.0);
            let flag = if (15.0..=30.0).contains(&dt) { 1.0 } else { 0.0 };
            (
                (dt / TIME_NORM).min(1.0),
                (m.size / inp.m_max).clamp(0.0, 1.0),
                flag,
            )
        }
        None => (1.0, 0.0, 0.0),
    };
    Observation {
        cgm: inp.cgm,
        iob_bolus: bolus_iob(inp.boluses, inp.t),
        cob: inp.gut_mg / 1000.0,
        cgm_trend: inp
            .prev_cgm
            .map(|p| (inp.cgm - p) / inp.step_min)
            .unwrap_or(0.0),
        sin_t: phase.sin(),
        cos_t: phase.cos(),
        tsm_norm: since(inp.last_meal),
        tsb_norm: since(inp.last_bolus),
        pending_meal_norm: (inp.pending_g / inp.m_max).clamp(0.0, 1.0),
        meal_count_norm: (inp.meals_today as f64 / inp.max_meals as f64).clamp(0.0, 1.0),
        bolus_count_norm: (inp.boluses_today as f64 / inp.max_boluses as f64).clamp(0.0, 1.0),
        time_until_meal_norm: until,
        next_meal_size_norm: size,
        pre_bolus_flag: flag,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn inputs() -> ObservationInputs<'static> {
        ObservationInputs {
            t: 0.0,
            cgm: 120.0,
            prev_cgm: None,
            step_min: 5.0,
            gut_mg: 0.0,
            boluses: &[],
            last_meal: None,
            last_bolus: None,
            pending_g: 0.0,
            meals_today: 0,
            boluses_today: 0,
            max_meals: 7,
            max_boluses: 8,
            m_max: 100.0,
            next_meal: None,
        }
    }

    #[test]
    fn midnight_phase_and_empty_history() {
        let o = build_observation(&inputs());
        assert_eq!(o.sin_t, 0.0);
        assert_eq!(o.cos_t, 1.0);
        assert_eq!(o.iob_bolus, 0.0);
        assert_eq!(o.tsm_norm, 1.0);
    }

    #[test]
    fn pre_bolus_window() {
        let o = build_observation(&ObservationInputs {
            t: 400.0,
            next_meal: Some(MealEvent { time: 420.0, size: 50.0 }),
            ..inputs()
        });
        assert_eq!(o.pre_bolus_flag, 1.0);
        assert!((o.time_until_meal_norm - 20.0 / 180.0).abs() < 1e-15);
        assert_eq!(o.next_meal_size_norm, 0.5);
    }

    #[test]
    fn iob_decays_linearly() {
        let b = [(0.0, 4.0)];
        assert_eq!(bolus_iob(&b, 0.0), 4.0);
        assert_eq!(bolus_iob(&b, 120.0), 2.0);
        assert_eq!(bolus_iob(&b, 240.0), 0.0);
    }
}
