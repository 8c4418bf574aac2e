//! Right-hand sides of the T1D and hybrid T2D glucose-insulin models.

use serde::{Deserialize, Serialize};

use super::state::{ControlInput, SimState};
use crate::error::{Result, SimError};
use crate::patients::PatientParams;

/// Units of exogenous insulin to pmol.
pub const PMOL_PER_UNIT: f64 = 6000.0;
/// mU of secreted insulin to pmol.
pub const F_CONV: f64 = 6.0;
/// Maximum fractional EGP suppression in the T2D model.
pub const X3_EFF_MAX: f64 = 0.95;

/// Zeroes a derivative that would push a non-positive state further down.
#[inline]
pub fn nn_guard(x: f64, dx: f64) -> f64 {
    if x <= 0.0 && dx < 0.0 {
        0.0
    } else {
        dx
    }
}

/// Time-of-day modulation `c(t) = 1 + A cos(2π (t - t_peak) / 1440)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CircadianConfig {
    pub amplitude: f64,
    /// Minute of day at which `c(t)` peaks.
    pub t_peak: f64,
}

impl Default for CircadianConfig {
    fn default() -> Self {
        Self {
            amplitude: 0.1,
            t_peak: 240.0,
        }
    }
}

impl CircadianConfig {
    pub fn disabled() -> Self {
        Self {
            amplitude: 0.0,
            ..Self::default()
        }
    }

    pub fn factor(&self, t_min: f64) -> f64 {
        let phase = 2.0 * std::f64::consts::PI * (t_min - self.t_peak) / 1440.0;
        1.0 + self.amplitude * phase.cos()
    }
}

/// Additive circadian term for the plasma glucose derivative (mg/kg/min).
pub fn circadian_rate(t_min: f64, state: &SimState, p: &PatientParams, cfg: &CircadianConfig) -> f64 {
    circadian_rate_from_factor(cfg.factor(t_min), state, p)
}

pub fn circadian_rate_from_factor(c: f64, state: &SimState, p: &PatientParams) -> f64 {
    if p.is_t2d() {
        (c - 1.0) * p.egp0_mg() * (1.0 - x3_effective(state.x3))
    } else {
        (c - 1.0) * p.k_p1
    }
}

/// Gastric emptying rate, interpolated between `k_min` and `k_max` by stomach fullness.
pub fn k_gut(q_sto: f64, d_bar: f64, p: &PatientParams) -> f64 {
    if d_bar <= 0.0 {
        return p.k_max;
    }
    let alpha = 5.0 / (2.0 * d_bar * (1.0 - p.b_gut));
    let beta = 5.0 / (2.0 * d_bar * p.d_gut);
    p.k_min
        + 0.5
            * (p.k_max - p.k_min)
            * ((alpha * (q_sto - p.b_gut * d_bar)).tanh() - (beta * (q_sto - p.d_gut * d_bar)).tanh()
                + 2.0)
}

/// Glucose rate of appearance from the intestine (mg/kg/min).
pub fn rate_of_appearance(d3: f64, p: &PatientParams) -> f64 {
    p.f * p.k_abs * d3 / p.bw
}

/// Threshold-linear renal excretion (mg/kg/min).
pub fn renal_excretion(gp: f64, p: &PatientParams) -> f64 {
    if gp > p.k_e2 {
        p.k_e1 * (gp - p.k_e2)
    } else {
        0.0
    }
}

pub fn x3_effective(x3: f64) -> f64 {
    x3.clamp(0.0, X3_EFF_MAX)
}

/// T1D endogenous production, suppressed by plasma glucose and delayed insulin.
pub fn egp_t1d(state: &SimState, p: &PatientParams) -> f64 {
    (p.k_p1 - p.k_p2 * state.gp - p.k_p3 * state.x3).max(0.0)
}

/// T2D endogenous production, suppressed by the hepatic remote action.
pub fn egp_t2d(state: &SimState, p: &PatientParams) -> f64 {
    (p.egp0_mg() * (1.0 - x3_effective(state.x3))).max(0.0)
}

/// Plasma glucose as mmol/L.
pub fn glucose_mmol(state: &SimState, p: &PatientParams) -> f64 {
    state.gp / p.vg / 18.0
}

/// Total secretion (mU/min) and the resulting portal flux (pmol/kg/min).
pub fn endogenous_secretion(y: f64, p: &PatientParams) -> (f64, f64) {
    let s_total = p.s_b_kg * p.bw + p.beta_cell * y.max(0.0);
    (s_total, F_CONV * s_total / p.bw)
}

struct Exercise {
    de1: f64,
    dte: f64,
    de2: f64,
    qe1: f64,
    qe21: f64,
    qe22: f64,
}

fn exercise(state: &SimState, u: &ControlInput, p: &PatientParams) -> Exercise {
    let hr = u.hr_rel.clamp(0.0, 1.0) * (p.hr_max() - p.hr0) + p.hr0;
    let de1 = (hr - p.hr0 - state.e1) / p.tau_hr;
    let e1 = state.e1.max(0.0);
    let z = (e1 / (p.alpha_hr * p.hr0)).powf(p.n_hr);
    let f_e1 = z / (1.0 + z);
    let te = state.te.max(1e-9);
    let dte = (p.c1 * f_e1 + p.c2 - state.te) / p.tau_ex;
    let de2 = -(f_e1 / p.tau_in + 1.0 / te) * state.e2 + f_e1 * te / (p.c1 + p.c2);

    let qe1 = p.beta_ex * e1 / p.hr0;
    let v_max = p.alpha_qe * state.e2 * state.e2;
    let gp = state.gp.max(0.0);
    let gt = state.gt.max(0.0);
    let s_p = v_max * gp / (p.k_m_ex + gp);
    let s_t = v_max * gt / (p.k_m_ex + gt);
    Exercise {
        de1,
        dte,
        de2,
        qe1,
        qe21: s_p.min(p.c_cap * gp),
        qe22: s_t.min(p.c_cap * gt),
    }
}

/// Gut, exercise, insulin PK and CGM-filter derivatives shared by both models.
/// Returns the partially filled derivative plus the exercise shunts.
fn shared_terms(state: &SimState, u: &ControlInput, p: &PatientParams) -> (SimState, Exercise) {
    let mut d = SimState::default();

    let q_sto = state.d1 + state.d2;
    let kgut = k_gut(q_sto, u.d_bar, p);
    d.d1 = -p.k_gri * state.d1 + 1000.0 * u.cho.max(0.0);
    d.d2 = p.k_gri * state.d1 - kgut * state.d2;
    d.d3 = kgut * state.d2 - p.k_abs * state.d3;

    let ex = exercise(state, u, p);
    d.e1 = ex.de1;
    d.te = ex.dte;
    d.e2 = ex.de2;

    let iir = u.ins.max(0.0) * PMOL_PER_UNIT / p.bw;
    d.isc1 = -(p.ka1 + p.kd) * state.isc1 + iir;
    d.isc2 = p.kd * state.isc1 - p.ka2 * state.isc2;
    d.ip = -(p.m2 + p.m4) * state.ip + p.m1 * state.il + p.ka1 * state.isc1 + p.ka2 * state.isc2;
    d.il = -(p.m1 + p.m30) * state.il + p.m2 * state.ip;

    d.gsc = -p.k_sc * state.gsc + p.k_sc * state.gp;
    (d, ex)
}

fn apply_guards(state: &SimState, d: &mut SimState) {
    d.gp = nn_guard(state.gp, d.gp);
    d.gt = nn_guard(state.gt, d.gt);
    d.ip = nn_guard(state.ip, d.ip);
    d.il = nn_guard(state.il, d.il);
    d.isc1 = nn_guard(state.isc1, d.isc1);
    d.isc2 = nn_guard(state.isc2, d.isc2);
    d.gsc = nn_guard(state.gsc, d.gsc);
}

/// Type 1 dynamics: no secretion, chained remote insulin actions.
pub fn derivatives_t1d(
    state: &SimState,
    u: &ControlInput,
    p: &PatientParams,
    t: f64,
    circ: &CircadianConfig,
) -> Result<SimState> {
    state.check_finite()?;
    let (mut d, ex) = shared_terms(state, u, p);

    let insulin = state.ip / p.vi;
    d.x1 = -p.p_2u * state.x1 + p.p_2u * (insulin - p.ib);
    d.x2 = -p.k_i * (state.x2 - insulin);
    d.x3 = -p.k_i * (state.x3 - state.x2);

    let egp = egp_t1d(state, p);
    let ra = rate_of_appearance(state.d3, p);
    let e = renal_excretion(state.gp, p);
    let vm = p.v_m0 + p.v_mx * state.x1;
    let gt = state.gt.max(0.0);
    let uid = vm * gt / (p.k_m0 + gt);
    let r_circ = circadian_rate(t, state, p, circ);

    d.gp = egp + ra - p.f_snc - e - p.k1 * state.gp + p.k2 * state.gt - ex.qe21 + r_circ;
    d.gt = p.k1 * state.gp - p.k2 * state.gt - uid - ex.qe1 - ex.qe22;

    d.y = 0.0;
    d.gf = 0.0;
    apply_guards(state, &mut d);
    Ok(d)
}

/// Hybrid type 2 dynamics: residual secretion, parallel remote actions and
/// clipped hepatic suppression.
pub fn derivatives_t2d(
    state: &SimState,
    u: &ControlInput,
    p: &PatientParams,
    t: f64,
    circ: &CircadianConfig,
) -> Result<SimState> {
    state.check_finite()?;
    let (mut d, ex) = shared_terms(state, u, p);

    let g = glucose_mmol(state, p);
    d.gf = (g - state.gf) / p.tau_dg;
    d.y = -p.alpha_s * state.y + p.beta_s * (g - p.h).max(0.0) + p.k_deriv * d.gf.max(0.0);
    let (_, s_endog) = endogenous_secretion(state.y, p);
    d.il += s_endog;

    let i_mu = state.ip / p.vi / 6.0;
    d.x1 = -p.ka_r1 * state.x1 + p.si1 * i_mu;
    d.x2 = -p.ka_r2 * state.x2 + p.si2 * i_mu;
    d.x3 = -p.ka_r3 * state.x3 + p.si3 * i_mu;

    let egp = egp_t2d(state, p);
    let ra = rate_of_appearance(state.d3, p);
    let e = renal_excretion(state.gp, p);
    let vm = p.v_m0 + p.v_mx * (state.x1 + state.x2);
    let gt = state.gt.max(0.0);
    let uid = vm * gt / (p.k_m0 + gt);
    let r_circ = circadian_rate(t, state, p, circ);

    d.gp = egp + ra - p.fcns_mg() - e - p.k1 * state.gp + p.k2 * state.gt - ex.qe21 + r_circ;
    d.gt = p.k1 * state.gp - p.k2 * state.gt - uid - ex.qe1 - ex.qe22;
    apply_guards(state, &mut d);
    Ok(d)
}

/// Dispatches on the patient's adaptation.
pub fn derivatives(
    state: &SimState,
    u: &ControlInput,
    p: &PatientParams,
    t: f64,
    circ: &CircadianConfig,
) -> Result<SimState> {
    match p.diabetes_type {
        Some(ty) if ty.is_t2d() => derivatives_t2d(state, u, p, t, circ),
        Some(_) => derivatives_t1d(state, u, p, t, circ),
        None => Err(SimError::Adaptation(format!(
            "patient `{}` has not been adapted to a diabetes type",
            p.id
        ))),
    }
}
