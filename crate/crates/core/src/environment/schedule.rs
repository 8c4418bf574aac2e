//! Procedural daily meal schedules.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::patients::Cohort;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MealEvent {
    /// Absolute minute since episode start.
    pub time: f64,
    /// Carbohydrate (g).
    pub size: f64,
}

/// A window in minutes-of-day with a size range at adult scale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MealSlot {
    pub center: f64,
    pub jitter: f64,
    pub min_g: f64,
    pub max_g: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScheduleConfig {
    pub main: Vec<MealSlot>,
    pub snacks: Vec<MealSlot>,
    pub max_snacks: usize,
    /// Size multipliers for child, adolescent and adult.
    pub cohort_scale: [f64; 3],
}

impl Default for ScheduleConfig {
    fn default() -> Self {
        let slot = |h: f64, min_g, max_g| MealSlot {
            center: h * 60.0,
            jitter: 30.0,
            min_g,
            max_g,
        };
        Self {
            main: vec![slot(7.5, 30.0, 70.0), slot(12.5, 40.0, 90.0), slot(18.5, 50.0, 100.0)],
            snacks: vec![slot(10.0, 20.0, 30.0), slot(15.5, 20.0, 30.0), slot(21.0, 20.0, 30.0)],
            max_snacks: 2,
            cohort_scale: [0.6, 0.8, 1.0],
        }
    }
}

impl ScheduleConfig {
    pub fn scale(&self, cohort: Cohort) -> f64 {
        match cohort {
            Cohort::Child => self.cohort_scale[0],
            Cohort::Adolescent => self.cohort_scale[1],
            Cohort::Adult => self.cohort_scale[2],
        }
    }
}

/// Meals for one day, sorted by time. Sizes are rounded to whole grams.
pub fn generate_meal_schedule<R: Rng + ?Sized>(
    cfg: &ScheduleConfig,
    cohort: Cohort,
    day_index: usize,
    rng: &mut R,
) -> Vec<MealEvent> {
    let scale = cfg.scale(cohort);
    let offset = day_index as f64 * 1440.0;
    let draw = |slot: &MealSlot, rng: &mut R| {
        let dt = if slot.jitter > 0.0 {
            rng.random_range(-slot.jitter..=slot.jitter)
        } else {
            0.0
        };
        let g = if slot.max_g > slot.min_g {
            rng.random_range(slot.min_g..=slot.max_g)
        } else {
            slot.min_g
        };
        MealEvent {
            time: offset + (slot.center + dt).round().clamp(0.0, 1439.0),
            size: (g * scale).round().max(1.0),
        }
    };

    let mut events: Vec<MealEvent> = cfg.main.iter().map(|s| draw(s, rng)).collect();
    let n_snacks = if cfg.snacks.is_empty() {
        0
    } else {
        rng.random_range(0..=cfg.max_snacks.min(cfg.snacks.len()))
    };
    let mut slots: Vec<usize> = (0..cfg.snacks.len()).collect();
    for k in 0..n_snacks {
        let j = rng.random_range(k..slots.len());
        slots.swap(k, j);
    }
    for &i in &slots[..n_snacks] {
        events.push(draw(&cfg.snacks[i], rng));
    }
    events.sort_by(|a, b| a.time.total_cmp(&b.time));
    events
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn deterministic_and_bounded() {
        let cfg = ScheduleConfig::default();
        let a = generate_meal_schedule(&cfg, Cohort::Adult, 2, &mut ChaCha8Rng::seed_from_u64(5));
        let b = generate_meal_schedule(&cfg, Cohort::Adult, 2, &mut ChaCha8Rng::seed_from_u64(5));
        assert_eq!(a, b);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for day in 0..1000 {
            let s = generate_meal_schedule(&cfg, Cohort::Adult, day, &mut rng);
            assert!((3..=5).contains(&s.len()));
            assert!(s.windows(2).all(|w| w[0].time <= w[1].time));
            for e in &s {
                assert!((20.0..=100.0).contains(&e.size), "{}", e.size);
                assert!(e.time >= day as f64 * 1440.0 && e.time < (day + 1) as f64 * 1440.0);
            }
        }
    }

    #[test]
    fn zero_snacks() {
        let cfg = ScheduleConfig {
            max_snacks: 0,
            ..ScheduleConfig::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for day in 0..50 {
            assert_eq!(generate_meal_schedule(&cfg, Cohort::Child, day, &mut rng).len(), 3);
        }
    }
}
