//! The 5-minute control-step environment.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::action::{accept_action, ActionPair, GateContext};
use super::config::ScenarioConfig;
use super::observation::{basal_iob, bolus_iob, build_observation, Observation, ObservationInputs};
use super::record::{EpisodeRecord, StepRecord, TerminationReason};
use super::schedule::{generate_meal_schedule, MealEvent};
use crate::error::{Result, SimError};
use crate::patients::{balance::equilibrium_state, cohort::find_patient, prepare_patient, PatientParams};
use crate::physiology::dynamics::PMOL_PER_UNIT;
use crate::physiology::{cgm_read, derivatives, ou_step, rk4_step, ControlInput, SensorState, SimState};
use crate::reward::{delta_risk_reward, final_cost, shaping_terms, terminal_penalty, ProxyModel, ShapingTerms, StepContext};

pub const STEP_MIN: usize = 5;
pub const STEPS_PER_DAY: usize = 288;
pub const CRITICAL_LOW: f64 = 10.0;
pub const CRITICAL_HIGH: f64 = 600.0;

/// RNG streams derived from the scenario seed. Each source of randomness
/// has its own stream so that changing actions never shifts the others.
const STREAM_SCHEDULE: u64 = 1;
const STREAM_SENSOR: u64 = 2;
const STREAM_PROCESS: u64 = 3;
const STREAM_EXECUTION: u64 = 4;

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

/// Terminal check on plasma glucose and elapsed control steps.
pub fn check_termination(bg: f64, steps: usize, horizon: usize) -> (bool, Option<TerminationReason>, usize) {
    let remaining = horizon.saturating_sub(steps);
    if bg < CRITICAL_LOW {
        (true, Some(TerminationReason::CriticalHypo), remaining)
    } else if bg > CRITICAL_HIGH {
        (true, Some(TerminationReason::CriticalHyper), remaining)
    } else if steps >= horizon {
        (true, Some(TerminationReason::TimeLimit), 0)
    } else {
        (false, None, remaining)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub observation: Observation,
    pub reward: f64,
    pub cost: f64,
    pub terminated: bool,
    pub termination: Option<TerminationReason>,
    pub action: ActionPair,
    pub bg: f64,
    pub cgm: f64,
    pub r_delta: f64,
    pub shaping: ShapingTerms,
}

#[derive(Debug, Clone)]
pub struct Environment {
    cfg: ScenarioConfig,
    p: PatientParams,
    proxy: ProxyModel,
    state: SimState,
    t: usize,
    steps: usize,
    horizon: usize,
    sensor: SensorState,
    rng_sensor: ChaCha8Rng,
    rng_process: ChaCha8Rng,
    rng_exec: ChaCha8Rng,
    schedule: Vec<MealEvent>,
    next_sched: usize,
    pending_g: f64,
    d_bar: f64,
    carb_stream: Vec<f64>,
    bolus_stream: Vec<f64>,
    boluses: Vec<(f64, f64)>,
    last_meal: Option<f64>,
    last_controller_meal: Option<f64>,
    last_bolus: Option<f64>,
    day: usize,
    meals_today: u32,
    boluses_today: u32,
    cgm: f64,
    prev_cgm: Option<f64>,
    basal_iob: f64,
    termination: Option<TerminationReason>,
    record: EpisodeRecord,
}

impl Environment {
    /// Builds an episode for an already adapted patient.
    pub fn new(p: PatientParams, cfg: ScenarioConfig) -> Result<Self> {
        cfg.validate()?;
        if p.diabetes_type.is_none() {
            return Err(SimError::Adaptation(format!("patient `{}` is not adapted", p.id)));
        }
        let horizon = cfg.horizon_steps();
        let mut rng_sched = stream(cfg.seed, STREAM_SCHEDULE);
        let mut schedule = Vec::new();
        for day in 0..=cfg.horizon_days {
            schedule.extend(generate_meal_schedule(&cfg.schedule, p.cohort, day, &mut rng_sched));
        }
        let mut rng_sensor = stream(cfg.seed, STREAM_SENSOR);
        let mut sensor = SensorState::new(&cfg.sensor, &mut rng_sensor);
        let state = equilibrium_state(&p);
        state.check_finite()?;
        let cgm = cgm_read(state.gsc, p.vg, &mut sensor, &cfg.sensor, &mut rng_sensor);
        let stream_len = horizon * STEP_MIN + cfg.proxy.horizon * STEP_MIN + 1;
        let proxy = ProxyModel::for_patient(&p, &cfg.proxy);
        let record = EpisodeRecord {
            patient_id: p.id.clone(),
            seed: cfg.seed,
            ..EpisodeRecord::default()
        };
        Ok(Self {
            basal_iob: basal_iob(p.basal_rate),
            proxy,
            state,
            t: 0,
            steps: 0,
            horizon,
            sensor,
            rng_sensor,
            rng_process: stream(cfg.seed, STREAM_PROCESS),
            rng_exec: stream(cfg.seed, STREAM_EXECUTION),
            schedule,
            next_sched: 0,
            pending_g: 0.0,
            d_bar: 0.0,
            carb_stream: vec![0.0; stream_len],
            bolus_stream: vec![0.0; stream_len],
            boluses: Vec::new(),
            last_meal: None,
            last_controller_meal: None,
            last_bolus: None,
            day: 0,
            meals_today: 0,
            boluses_today: 0,
            cgm,
            prev_cgm: None,
            termination: None,
            record,
            cfg,
            p,
        })
    }

    /// Looks the patient up in `cohort`, tunes and adapts it, then builds the episode.
    pub fn from_cohort(cohort: &[PatientParams], cfg: ScenarioConfig) -> Result<Self> {
        let raw = find_patient(cohort, &cfg.patient_id)?;
        let p = prepare_patient(raw, cfg.diabetes_type, cfg.tuning)?;
        Self::new(p, cfg)
    }

    pub fn patient(&self) -> &PatientParams {
        &self.p
    }

    pub fn config(&self) -> &ScenarioConfig {
        &self.cfg
    }

    pub fn proxy(&self) -> &ProxyModel {
        &self.proxy
    }

    pub fn state(&self) -> &SimState {
        &self.state
    }

    /// Overrides the physiological state (testing and fault injection).
    pub fn set_state(&mut self, s: SimState) {
        self.state = s;
    }

    /// Current absolute minute.
    pub fn time(&self) -> usize {
        self.t
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn bg(&self) -> f64 {
        self.state.plasma_glucose(self.p.vg)
    }

    pub fn cgm(&self) -> f64 {
        self.cgm
    }

    pub fn schedule(&self) -> &[MealEvent] {
        &self.schedule
    }

    pub fn termination(&self) -> Option<TerminationReason> {
        self.termination
    }

    pub fn is_terminated(&self) -> bool {
        self.termination.is_some()
    }

    pub fn record(&self) -> &EpisodeRecord {
        &self.record
    }

    pub fn into_record(self) -> EpisodeRecord {
        self.record
    }

    /// Tags the most recent step with the shield mode that produced it.
    pub fn annotate_last(&mut self, shield_mode: &str) {
        if let Some(s) = self.record.steps.last_mut() {
            s.shield_mode = shield_mode.to_string();
        }
    }

    /// Total insulin on board (U), basal included.
    pub fn total_iob(&self) -> f64 {
        bolus_iob(&self.boluses, self.t as f64) + self.basal_iob
    }

    fn next_meal(&self) -> Option<MealEvent> {
        self.schedule[self.next_sched..]
            .iter()
            .find(|m| m.time >= self.t as f64)
            .copied()
    }

    pub fn observation(&self) -> Observation {
        build_observation(&ObservationInputs {
            t: self.t as f64,
            cgm: self.cgm,
            prev_cgm: self.prev_cgm,
            step_min: STEP_MIN as f64,
            gut_mg: self.state.d1 + self.state.d2 + self.state.d3,
            boluses: &self.boluses,
            last_meal: self.last_meal,
            last_bolus: self.last_bolus,
            pending_g: self.pending_g,
            meals_today: self.meals_today,
            boluses_today: self.boluses_today,
            max_meals: self.p.max_meals_day,
            max_boluses: self.p.max_boluses_day,
            m_max: self.p.m_max,
            next_meal: self.next_meal(),
        })
    }

    fn exercise_at(&self, minute: f64) -> f64 {
        self.cfg
            .exercise
            .iter()
            .find(|b| minute >= b.start && minute < b.end)
            .map(|b| b.hr_rel)
            .unwrap_or(0.0)
    }

    /// Minute-resolved carbohydrate window for the proxy: the last
    /// `kernel_len - 1` minutes of intake followed by the expected intake over
    /// the forecast horizon (pending buffer, `extra_meal_g`, known scheduled
    /// meals). Returns the window and the index of the current minute.
    pub fn carb_window(&self, extra_meal_g: f64) -> (Vec<f64>, usize) {
        let back = self.proxy.k_carb.len() - 1;
        let start = self.t.saturating_sub(back);
        let now = self.t - start;
        let ahead = self.proxy.horizon * STEP_MIN;
        let mut w = Vec::with_capacity(now + ahead);
        w.extend_from_slice(&self.carb_stream[start..self.t]);
        let mut pending = self.pending_g + extra_meal_g;
        let mut k = self.next_sched;
        for m in 0..ahead {
            let minute = (self.t + m) as f64;
            if self.cfg.forecast_scheduled_meals {
                while k < self.schedule.len() && self.schedule[k].time <= minute {
                    if self.schedule[k].time >= self.t as f64 {
                        pending += self.schedule[k].size;
                    }
                    k += 1;
                }
            }
            let cho = pending.min(self.cfg.carb_rate);
            pending -= cho;
            w.push(cho);
        }
        (w, now)
    }

    /// Bolus history window aligned with [`Environment::carb_window`].
    pub fn insulin_window(&self) -> (Vec<f64>, usize) {
        let back = self.proxy.k_ins.len() - 1;
        let start = self.t.saturating_sub(back);
        let ahead = self.proxy.horizon * STEP_MIN;
        let mut w = Vec::with_capacity(self.t - start + ahead);
        w.extend_from_slice(&self.bolus_stream[start..self.t]);
        w.resize(self.t - start + ahead, 0.0);
        (w, self.t - start)
    }

    /// Raw per-step proxy drives (carbohydrate g, insulin U) for inaction.
    pub fn baseline_drives(&self) -> (Vec<f64>, Vec<f64>) {
        let (cw, cn) = self.carb_window(0.0);
        let (iw, inow) = self.insulin_window();
        (
            self.proxy.convolve_steps(&self.proxy.k_carb, &cw, cn),
            self.proxy.convolve_steps(&self.proxy.k_ins, &iw, inow),
        )
    }

    /// Raw carbohydrate drive with an extra meal entering the buffer now.
    pub fn carb_drive_with_meal(&self, meal_g: f64) -> Vec<f64> {
        let (cw, cn) = self.carb_window(meal_g);
        self.proxy.convolve_steps(&self.proxy.k_carb, &cw, cn)
    }

    /// Raw per-step drives over the horizon starting at `origin` (minutes),
    /// computed from the intake and boluses that actually happened. Complete
    /// once `origin` is at least one horizon in the past.
    pub fn realized_drives(&self, origin: usize) -> (Vec<f64>, Vec<f64>) {
        let end = (self.t).min(self.carb_stream.len());
        let origin = origin.min(end);
        (
            self.proxy.convolve_steps(&self.proxy.k_carb, &self.carb_stream[..end], origin),
            self.proxy.convolve_steps(&self.proxy.k_ins, &self.bolus_stream[..end], origin),
        )
    }

    fn gate_context(&self) -> GateContext {
        GateContext {
            cgm: self.cgm,
            t: self.t as f64,
            last_meal: self.last_meal,
            last_bolus: self.last_bolus,
            meals_today: self.meals_today,
            boluses_today: self.boluses_today,
            max_meals: self.p.max_meals_day,
            max_boluses: self.p.max_boluses_day,
            w_meal: self.p.w_meal,
            w_bolus: self.p.w_bolus,
            b_max: self.p.b_max,
            m_max: self.p.m_max,
            exercise_active: self.exercise_at(self.t as f64) > 0.0,
        }
    }

    fn add_to_buffer(&mut self, grams: f64) {
        self.pending_g += grams;
        self.d_bar = self.state.d1 + self.state.d2 + 1000.0 * self.pending_g;
    }

    fn admit_scheduled(&mut self, minute: f64) {
        while self.next_sched < self.schedule.len() && self.schedule[self.next_sched].time <= minute {
            let ev = self.schedule[self.next_sched];
            if let Some(cm) = self.last_controller_meal {
                let until = cm + self.cfg.postpone_buffer;
                if ev.time >= cm && ev.time < until && until > minute {
                    // delay to the end of the buffer, keeping the list sorted
                    self.schedule[self.next_sched].time = until;
                    self.schedule[self.next_sched..].sort_by(|a, b| a.time.total_cmp(&b.time));
                    continue;
                }
            }
            self.add_to_buffer(ev.size);
            self.last_meal = Some(minute);
            self.next_sched += 1;
        }
    }

    /// Advances one control step with grid action `(bolus_idx, meal_idx)`.
    pub fn step(&mut self, bolus_idx: usize, meal_idx: usize) -> Result<StepOutcome> {
        let a = ActionPair::new(&self.cfg.grid, bolus_idx, meal_idx)?;
        self.step_pair(a)
    }

    pub fn step_pair(&mut self, requested: ActionPair) -> Result<StepOutcome> {
        if self.termination.is_some() {
            return Err(SimError::Terminated);
        }
        let obs = self.observation();
        let t0 = self.t as f64;
        let day = self.t / 1440;
        if day != self.day {
            self.day = day;
            self.meals_today = 0;
            self.boluses_today = 0;
        }

        let action = accept_action(&requested, &self.gate_context(), &self.cfg.execution, &mut self.rng_exec);
        let bg0 = self.bg();
        let iob_total = self.total_iob();
        let since_last_bolus = self.last_bolus.map(|l| t0 - l);

        // counterfactual proxy rollouts on the executed quantities
        let (base_carb, base_ins) = self.baseline_drives();
        let baseline = self.proxy.rollout_from_drives(bg0, &base_carb, &base_ins);
        let r_delta = if action.accepted_bolus > 0.0 || action.accepted_meal > 0.0 {
            let carb = if action.accepted_meal > 0.0 {
                self.carb_drive_with_meal(action.accepted_meal)
            } else {
                base_carb.clone()
            };
            let unit = self.proxy.unit_bolus_drive();
            let ins: Vec<f64> = base_ins
                .iter()
                .zip(&unit)
                .map(|(b, u)| b + action.accepted_bolus * u)
                .collect();
            let act = self.proxy.rollout_from_drives(bg0, &carb, &ins);
            delta_risk_reward(bg0, &baseline, &act, &self.cfg.risk)
        } else {
            0.0
        };

        if action.accepted_bolus > 0.0 {
            self.state.isc1 += action.accepted_bolus * PMOL_PER_UNIT / self.p.bw;
            self.bolus_stream[self.t] += action.accepted_bolus;
            self.boluses.push((t0, action.accepted_bolus));
            self.last_bolus = Some(t0);
            self.boluses_today += 1;
        }
        if action.accepted_meal > 0.0 {
            self.add_to_buffer(action.accepted_meal);
            self.last_meal = Some(t0);
            self.last_controller_meal = Some(t0);
            self.meals_today += 1;
        }

        let basal = self.p.basal_rate / 60.0;
        for m in 0..STEP_MIN {
            let minute = self.t + m;
            self.admit_scheduled(minute as f64);
            let cho = self.pending_g.min(self.cfg.carb_rate);
            self.pending_g -= cho;
            if self.pending_g < 1e-12 {
                self.pending_g = 0.0;
            }
            self.carb_stream[minute] = cho;
            let u = ControlInput {
                cho,
                ins: basal,
                hr_rel: self.exercise_at(minute as f64),
                d_bar: self.d_bar,
            };
            let p = &self.p;
            let circ = &self.cfg.circadian;
            self.state = rk4_step(|tt, s| derivatives(s, &u, p, tt, circ), minute as f64, &self.state, 1.0)?;
            let ou = &self.cfg.process_noise;
            if ou.sigma > 0.0 {
                let next = ou_step(self.sensor.ou_value, ou.theta, ou.sigma, 1.0, &mut self.rng_process);
                self.state.gp = (self.state.gp + (next - self.sensor.ou_value) * self.p.vg).max(0.0);
                self.sensor.ou_value = next;
            }
        }
        self.t += STEP_MIN;
        self.steps += 1;
        self.prev_cgm = Some(self.cgm);
        self.cgm = cgm_read(self.state.gsc, self.p.vg, &mut self.sensor, &self.cfg.sensor, &mut self.rng_sensor);

        let bg1 = self.bg();
        let cost = if requested.meal_norm > 0.0 && (70.0..=180.0).contains(&bg0) {
            final_cost(baseline[0], baseline[0] - bg0, &self.cfg.risk)
        } else {
            final_cost(bg1, bg1 - bg0, &self.cfg.risk)
        };
        let shaping = shaping_terms(&StepContext {
            bg: bg1,
            bolus_u: action.accepted_bolus,
            meal_g: action.accepted_meal,
            exercise: self.exercise_at(t0) > 0.0,
            iob_total,
            n_bolus: self.boluses_today,
            n_meal: self.meals_today,
            frac_day: (t0 % 1440.0) / 1440.0,
            since_last_bolus,
            bolus_cap: self.p.max_boluses_day,
            meal_cap: self.p.max_meals_day,
        });
        let mut reward = r_delta + shaping.net();

        let (terminated, reason, remaining) = check_termination(bg1, self.steps, self.horizon);
        if terminated {
            if reason != Some(TerminationReason::TimeLimit) {
                reward -= terminal_penalty(remaining);
            }
            self.termination = reason;
            self.record.termination = reason;
        }

        self.record.steps.push(StepRecord {
            step: self.steps - 1,
            t: self.t as f64,
            bg: bg1,
            cgm: self.cgm,
            obs,
            action,
            reward,
            cost,
            r_delta,
            shield_mode: "none".into(),
        });

        Ok(StepOutcome {
            observation: self.observation(),
            reward,
            cost,
            terminated,
            termination: reason,
            action,
            bg: bg1,
            cgm: self.cgm,
            r_delta,
            shaping,
        })
    }
}
